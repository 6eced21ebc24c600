use crate::dist::JointDistribution;
use crate::error::{Error, Result};
use crate::histogram::JointHistogram;

/// Raw moments `⟨m_s^j m_i^k⟩` for `j, k ≤ 3` plus central second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    /// Number of shots behind the moments; infinite for an exact distribution.
    pub weight: f64,
    raw: [[f64; 4]; 4],
    pub var_s: f64,
    pub var_i: f64,
    pub cov: f64,
    pub var_diff: f64,
}

impl Moments {
    pub fn raw(&self, j: usize, k: usize) -> f64 {
        self.raw[j][k]
    }

    pub fn mean_s(&self) -> f64 {
        self.raw[1][0]
    }

    pub fn mean_i(&self) -> f64 {
        self.raw[0][1]
    }

    /// Tallies are summed exactly in integers before the single division per moment.
    pub fn from_histogram(h: &JointHistogram) -> Result<Self> {
        let n = h.shots();
        if n == 0 {
            return Err(Error::EmptyHistogram);
        }
        let mut sums = [[0u128; 4]; 4];
        for ((a, b), &c) in h.counts().indexed_iter() {
            if c == 0 {
                continue;
            }
            let (a, b, c) = (a as u128, b as u128, c as u128);
            let pa = [1, a, a * a, a * a * a];
            let pb = [1, b, b * b, b * b * b];
            for j in 0..4 {
                for k in 0..4 {
                    sums[j][k] += c * pa[j] * pb[k];
                }
            }
        }
        let nn = n as u128;
        let nf = n as f64;
        let mut raw = [[0.0; 4]; 4];
        for j in 0..4 {
            for k in 0..4 {
                raw[j][k] = ratio(sums[j][k], nn);
            }
        }
        let central = |x: u128, y: u128, xy: u128| -> f64 {
            let num = nn as i128 * xy as i128 - x as i128 * y as i128;
            num as f64 / (nf * nf)
        };
        let var_s = central(sums[1][0], sums[1][0], sums[2][0]);
        let var_i = central(sums[0][1], sums[0][1], sums[0][2]);
        let cov = central(sums[1][0], sums[0][1], sums[1][1]);
        let d = sums[1][0] as i128 - sums[0][1] as i128;
        let dd = sums[2][0] as i128 + sums[0][2] as i128 - 2 * sums[1][1] as i128;
        let var_diff = (nn as i128 * dd - d * d) as f64 / (nf * nf);
        Ok(Self {
            weight: nf,
            raw,
            var_s,
            var_i,
            cov,
            var_diff,
        })
    }

    pub fn from_distribution(p: &JointDistribution<f64>) -> Result<Self> {
        let total = p.total();
        if !(total > 0.0) {
            return Err(Error::EmptyHistogram);
        }
        let mut raw = [[0.0; 4]; 4];
        for ((a, b), &v) in p.probs.indexed_iter() {
            let (a, b) = (a as f64, b as f64);
            let pa = [1.0, a, a * a, a * a * a];
            let pb = [1.0, b, b * b, b * b * b];
            for j in 0..4 {
                for k in 0..4 {
                    raw[j][k] += v * pa[j] * pb[k];
                }
            }
        }
        for row in raw.iter_mut() {
            for x in row.iter_mut() {
                *x /= total;
            }
        }
        let (ms, mi) = (raw[1][0], raw[0][1]);
        let (mut vs, mut vi, mut c, mut vd) = (0.0, 0.0, 0.0, 0.0);
        for ((a, b), &v) in p.probs.indexed_iter() {
            let da = a as f64 - ms;
            let db = b as f64 - mi;
            vs += v * da * da;
            vi += v * db * db;
            c += v * da * db;
            vd += v * (da - db) * (da - db);
        }
        Ok(Self {
            weight: f64::INFINITY,
            raw,
            var_s: vs / total,
            var_i: vi / total,
            cov: c / total,
            var_diff: vd / total,
        })
    }
}

fn ratio(num: u128, den: u128) -> f64 {
    let q = num / den;
    let r = num % den;
    q as f64 + r as f64 / den as f64
}

/// Anything the criteria can be evaluated on.
pub trait MomentSource {
    fn moments(&self) -> Result<Moments>;
}

impl MomentSource for JointHistogram {
    fn moments(&self) -> Result<Moments> {
        Moments::from_histogram(self)
    }
}

impl MomentSource for JointDistribution<f64> {
    fn moments(&self) -> Result<Moments> {
        Moments::from_distribution(self)
    }
}

impl MomentSource for Moments {
    fn moments(&self) -> Result<Moments> {
        Ok(self.clone())
    }
}
