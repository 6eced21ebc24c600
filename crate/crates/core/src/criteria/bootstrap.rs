use super::{core_statistics, Moments};
use crate::error::{Error, Result};
use crate::histogram::JointHistogram;
use crate::simulator::substream;
use ndarray::Array2;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Bootstrap standard errors; `None` where no resample produced a value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapErrors {
    pub resamples: usize,
    pub seed: u64,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    #[serde(rename = "H")]
    pub h: Option<f64>,
}

/// Multinomial resampling of the shots, one substream per resample.
fn resample(h: &JointHistogram, bins: &[((usize, usize), u64)], seed: u64, index: u64) -> JointHistogram {
    let mut rng = substream(seed, index);
    let mut counts = Array2::zeros(h.dim());
    let mut remaining = h.shots();
    let mut mass_left = h.shots();
    for &((a, b), c) in bins {
        if remaining == 0 {
            break;
        }
        let draw = if c == mass_left {
            remaining
        } else {
            let p = c as f64 / mass_left as f64;
            Binomial::new(remaining, p)
                .expect("valid probability")
                .sample(&mut rng)
        };
        counts[[a, b]] = draw;
        remaining -= draw;
        mass_left -= c;
    }
    JointHistogram::from_counts(counts)
}

pub fn bootstrap_errors(h: &JointHistogram, resamples: usize, seed: u64) -> Result<BootstrapErrors> {
    if h.shots() == 0 {
        return Err(Error::EmptyHistogram);
    }
    let bins: Vec<_> = h
        .counts()
        .indexed_iter()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c))
        .collect();
    let stats: Vec<[Option<f64>; 4]> = (0..resamples as u64)
        .into_par_iter()
        .map(|r| {
            let hb = resample(h, &bins, seed, r);
            Moments::from_histogram(&hb)
                .map(|m| core_statistics(&m))
                .unwrap_or([None; 4])
        })
        .collect();
    let sd = |k: usize| -> Option<f64> {
        let v: Vec<f64> = stats
            .iter()
            .filter_map(|s| s[k])
            .filter(|x| x.is_finite())
            .collect();
        if v.len() < 2 {
            return None;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        Some((v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    };
    Ok(BootstrapErrors {
        resamples,
        seed,
        c: sd(0),
        r: sd(1),
        s: sd(2),
        h: sd(3),
    })
}
