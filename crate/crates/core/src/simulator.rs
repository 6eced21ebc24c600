//! Seeded Monte Carlo generation of detected shots.
//!
//! Every shot draws from its own ChaCha stream selected by the shot index, so results
//! do not depend on how the work is split across threads.

use crate::criteria::{analyze, AnalysisOptions, CriteriaReport};
use crate::dist::{ModeParams, TwbModel};
use crate::error::{Error, Result};
use crate::histogram::{JointHistogram, ShotRecord};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

const CHUNK: usize = 4096;

/// Generator for substream `stream` of the run seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Negative-binomial count drawn as a Poisson variate with gamma-distributed mean.
pub fn sample_mandel_rice<R: Rng + ?Sized>(p: &ModeParams<f64>, rng: &mut R) -> u64 {
    if p.b == 0.0 {
        return 0;
    }
    let w = Gamma::new(p.mu, p.b)
        .expect("validated mode parameters")
        .sample(rng);
    if !(w > 0.0) {
        return 0;
    }
    Poisson::new(w).expect("positive finite mean").sample(rng) as u64
}

fn thin<R: Rng + ?Sized>(n: u64, eta: f64, rng: &mut R) -> u64 {
    if n == 0 || eta == 0.0 {
        return 0;
    }
    if eta == 1.0 {
        return n;
    }
    Binomial::new(n, eta).expect("validated efficiency").sample(rng)
}

/// One shot: shared pair count plus independent noise in each arm, then binomial losses.
pub fn sample_shot<R: Rng + ?Sized>(m: &TwbModel<f64>, rng: &mut R) -> ShotRecord {
    let np = sample_mandel_rice(&m.paired, rng);
    let ns = sample_mandel_rice(&m.noise_s, rng);
    let ni = sample_mandel_rice(&m.noise_i, rng);
    ShotRecord::new(thin(np + ns, m.eta_s, rng), thin(np + ni, m.eta_i, rng))
}

fn check(m: &TwbModel<f64>, shots: u64) -> Result<()> {
    m.validate()?;
    if shots == 0 {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    Ok(())
}

/// All shots in index order.
pub fn generate_shots(m: &TwbModel<f64>, shots: u64, seed: u64) -> Result<Vec<ShotRecord>> {
    check(m, shots)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![ShotRecord::new(0, 0); shots as usize];
    out.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
        for (k, slot) in chunk.iter_mut().enumerate() {
            let mut rng = base.clone();
            rng.set_stream((c * CHUNK + k) as u64);
            *slot = sample_shot(m, &mut rng);
        }
    });
    Ok(out)
}

/// Histogram of `shots` shots; identical to tallying [`generate_shots`].
pub fn run_experiment(m: &TwbModel<f64>, shots: u64, seed: u64) -> Result<JointHistogram> {
    check(m, shots)?;
    let base = ChaCha8Rng::seed_from_u64(seed);
    let n_chunks = (shots as usize).div_ceil(CHUNK);
    let parts: Vec<JointHistogram> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut h = JointHistogram::new();
            let end = ((c + 1) * CHUNK).min(shots as usize);
            for i in c * CHUNK..end {
                let mut rng = base.clone();
                rng.set_stream(i as u64);
                h.add(sample_shot(m, &mut rng));
            }
            h
        })
        .collect();
    let mut total = JointHistogram::new();
    for p in &parts {
        total.merge(p);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub model: TwbModel<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub points: Vec<SweepPoint>,
    pub shots: u64,
    pub seed: u64,
    #[serde(default)]
    pub analysis: AnalysisOptions,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub label: String,
    pub histogram: JointHistogram,
    pub report: CriteriaReport,
}

/// Runs every configured point with its own derived seed and evaluates the criteria.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepResult>> {
    let mut seen = HashSet::new();
    for p in &cfg.points {
        if !seen.insert(p.label.as_str()) {
            return Err(Error::Config(format!("duplicate sweep label {:?}", p.label)));
        }
    }
    if cfg.shots == 0 && !cfg.points.is_empty() {
        return Err(Error::Config("shots must be at least 1".into()));
    }
    cfg.points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let seed = derive_seed(cfg.seed, i as u64);
            let histogram = run_experiment(&p.model, cfg.shots, seed)?;
            let mut opts = cfg.analysis.clone();
            opts.seed = derive_seed(seed, u64::MAX);
            let report = analyze(&histogram, &opts)?;
            Ok(SweepResult {
                label: p.label.clone(),
                histogram,
                report,
            })
        })
        .collect()
}
