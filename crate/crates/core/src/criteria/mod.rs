//! Non-classicality criteria computed from joint count moments.

mod bootstrap;
mod moments;

pub use bootstrap::{bootstrap_errors, BootstrapErrors};
pub use moments::{MomentSource, Moments};

use crate::dist::Distribution1D;
use crate::error::{domain, Error, Result};
use serde::{Deserialize, Serialize};

/// Outcome of a single inequality test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Nonclassical,
    Classical,
    Inconclusive,
}

/// Width of the inconclusive band around a bound for exact (truncated) distributions,
/// whose moments carry truncation errors of this order.
pub const EXACT_BOUNDARY_TOL: f64 = 1e-8;

fn boundary_tol(m: &Moments) -> f64 {
    if m.weight.is_finite() {
        0.0
    } else {
        EXACT_BOUNDARY_TOL
    }
}

impl Verdict {
    /// `Nonclassical` when `value` lies on the nonclassical side of `bound` by more than `tol`.
    fn below(value: f64, bound: f64, tol: f64) -> Self {
        if value < bound - tol {
            Verdict::Nonclassical
        } else if value > bound + tol {
            Verdict::Classical
        } else {
            Verdict::Inconclusive
        }
    }

    fn above(value: f64, bound: f64, tol: f64) -> Self {
        Self::below(-value, -bound, tol)
    }

    pub fn is_nonclassical(self) -> bool {
        self == Verdict::Nonclassical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub r: Verdict,
    pub s: Verdict,
    pub h: Verdict,
}

impl Flags {
    pub fn all_nonclassical(&self) -> bool {
        self.r.is_nonclassical() && self.s.is_nonclassical() && self.h.is_nonclassical()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// Bootstrap resamples; zero disables error estimation.
    pub bootstrap: usize,
    pub seed: u64,
    /// Efficiency known from elsewhere, used for the sub-shot-noise band test.
    #[serde(default)]
    pub known_eta: Option<f64>,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            bootstrap: 200,
            seed: 0,
            known_eta: None,
        }
    }
}

/// All criteria evaluated on one data set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub shots: u64,
    pub mean_s: f64,
    pub mean_i: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "R_theory")]
    pub r_theory: Option<f64>,
    #[serde(rename = "S")]
    pub s: Option<f64>,
    #[serde(rename = "S_raw")]
    pub s_raw: f64,
    #[serde(rename = "H")]
    pub h: f64,
    pub fano_s: f64,
    pub fano_i: f64,
    pub mu_est_s: Option<f64>,
    pub mu_est_i: Option<f64>,
    pub eta_est: Option<f64>,
    /// Unequal arm means point to noise or unequal losses, both of which bias `eta_est` low.
    pub eta_bias_suspected: bool,
    pub sub_shot_noise_band: Option<bool>,
    pub flags: Flags,
    pub errors: Option<BootstrapErrors>,
}

/// Raw moment `⟨m_s^j m_i^k⟩`.
pub fn joint_moments<S: MomentSource + ?Sized>(h: &S, j: usize, k: usize) -> Result<f64> {
    if j > 3 || k > 3 {
        return domain(format!("moment orders up to 3 are supported, got ({j}, {k})"));
    }
    Ok(h.moments()?.raw(j, k))
}

/// Pearson correlation of the two counts.
pub fn correlation_coefficient<S: MomentSource + ?Sized>(h: &S) -> Result<f64> {
    correlation_from(&h.moments()?)
}

fn correlation_from(m: &Moments) -> Result<f64> {
    if !(m.var_s > 0.0 && m.var_i > 0.0) {
        return Err(Error::UndefinedStatistic(
            "correlation needs nonzero variance in both arms".into(),
        ));
    }
    Ok((m.cov / (m.var_s * m.var_i).sqrt()).clamp(-1.0, 1.0))
}

/// Variance of `m_s − m_i` over the mean total count.
pub fn noise_reduction<S: MomentSource + ?Sized>(h: &S) -> Result<f64> {
    noise_reduction_from(&h.moments()?)
}

fn noise_reduction_from(m: &Moments) -> Result<f64> {
    let total = m.mean_s() + m.mean_i();
    if !(total > 0.0) {
        return Err(Error::UndefinedStatistic(
            "noise reduction needs a nonzero mean".into(),
        ));
    }
    Ok((m.var_diff / total).max(0.0))
}

/// Noise reduction expected for a multimode twin beam with common efficiency `eta`.
pub fn noise_reduction_theory(mean_s: f64, mean_i: f64, eta: f64, mu: f64) -> Result<f64> {
    if !(mean_s >= 0.0 && mean_i >= 0.0) || mean_s + mean_i == 0.0 {
        return domain("means must be nonnegative and not both zero");
    }
    if !(0.0..=1.0).contains(&eta) {
        return domain(format!("efficiency must lie in [0, 1], got {eta}"));
    }
    if !(mu > 0.0) {
        return domain(format!("mode count must be positive, got {mu}"));
    }
    let sum = mean_s + mean_i;
    let prod = mean_s * mean_i;
    Ok(1.0 - 2.0 * eta * prod.sqrt() / sum + prod * prod / (mu * sum))
}

/// Schwarz-type ratio `⟨m_s m_i⟩ / √(⟨m_s(m_s−1)⟩⟨m_i(m_i−1)⟩)` on normally ordered moments.
///
/// Values above one are impossible for classical intensities.
pub fn schwarz_ratio<S: MomentSource + ?Sized>(h: &S) -> Result<f64> {
    schwarz_from(&h.moments()?)
}

fn schwarz_from(m: &Moments) -> Result<f64> {
    let fs = m.raw(2, 0) - m.raw(1, 0);
    let fi = m.raw(0, 2) - m.raw(0, 1);
    if !(fs > 0.0 && fi > 0.0) {
        return Err(Error::UndefinedStatistic(
            "Schwarz ratio needs positive second factorial moments".into(),
        ));
    }
    Ok(m.raw(1, 1) / (fs * fi).sqrt())
}

/// `⟨m_s m_i⟩ / √(⟨m_s²⟩⟨m_i²⟩)` on plain moments; never exceeds one.
pub fn schwarz_ratio_raw<S: MomentSource + ?Sized>(h: &S) -> Result<f64> {
    schwarz_raw_from(&h.moments()?)
}

fn schwarz_raw_from(m: &Moments) -> Result<f64> {
    let (a, b) = (m.raw(2, 0), m.raw(0, 2));
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::UndefinedStatistic("second moments vanish".into()));
    }
    Ok(m.raw(1, 1) / (a * b).sqrt())
}

/// Higher-order criterion built from normalized moments `g^{jk}` symmetrized over the arms.
pub fn higher_order_h<S: MomentSource + ?Sized>(h: &S) -> Result<f64> {
    higher_order_from(&h.moments()?)
}

fn higher_order_from(m: &Moments) -> Result<f64> {
    let (m1, m2) = (m.mean_s(), m.mean_i());
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::UndefinedStatistic("both means must be positive".into()));
    }
    let g = |j: usize, k: usize| m.raw(j, k) / (m1.powi(j as i32) * m2.powi(k as i32));
    let g11 = g(1, 1);
    if !(g11 > 0.0) {
        return Err(Error::UndefinedStatistic("⟨m_s m_i⟩ vanishes".into()));
    }
    let g13s = 0.5 * (g(1, 3) + g(3, 1));
    let g12s = 0.5 * (g(1, 2) + g(2, 1));
    Ok(m1 * m2 * (g(2, 2) - g13s) / g11 + (m1 * m2).sqrt() * g12s / g11)
}

/// Variance over mean of a count distribution.
pub fn fano(marg: &Distribution1D<f64>) -> Result<f64> {
    fano_from(marg.mean(), marg.variance())
}

pub fn fano_from(mean: f64, var: f64) -> Result<f64> {
    if !(mean > 0.0) {
        return Err(Error::UndefinedStatistic(
            "Fano factor needs a positive mean".into(),
        ));
    }
    Ok(var / mean)
}

/// Mode number `⟨m⟩² / (σ² − ⟨m⟩)` of a multimode thermal marginal.
///
/// Exact marginals whose excess variance is below [`EXACT_BOUNDARY_TOL`] of the mean count
/// as Poissonian.
pub fn mode_estimate(marg: &Distribution1D<f64>) -> Result<f64> {
    let (mean, var) = (marg.mean(), marg.variance());
    if var - mean <= EXACT_BOUNDARY_TOL * mean {
        return Err(Error::SubPoissonian(format!(
            "variance {var} does not exceed mean {mean}"
        )));
    }
    mode_estimate_from(mean, var)
}

pub fn mode_estimate_from(mean: f64, var: f64) -> Result<f64> {
    if !(var > mean) {
        return Err(Error::SubPoissonian(format!(
            "variance {var} does not exceed mean {mean}"
        )));
    }
    Ok(mean * mean / (var - mean))
}

/// Common efficiency `1 − R` inferred for an ideal twin beam.
pub fn eta_from_r<S: MomentSource + ?Sized>(h: &S) -> Result<f64> {
    eta_from(&h.moments()?)
}

fn eta_from(m: &Moments) -> Result<f64> {
    let r = noise_reduction_from(m)?;
    if r >= 1.0 - boundary_tol(m) {
        return Err(Error::ClassicalData(format!("R = {r} is not below 1")));
    }
    Ok(1.0 - r)
}

/// Statistics that are bootstrapped, in a fixed order.
pub(crate) fn core_statistics(m: &Moments) -> [Option<f64>; 4] {
    [
        correlation_from(m).ok(),
        noise_reduction_from(m).ok(),
        schwarz_from(m).ok(),
        higher_order_from(m).ok(),
    ]
}

/// Evaluates every criterion from precomputed moments.
pub fn report_from_moments(m: &Moments, known_eta: Option<f64>) -> Result<CriteriaReport> {
    let (ms, mi) = (m.mean_s(), m.mean_i());
    let c = correlation_from(m)?;
    let r = noise_reduction_from(m)?;
    let s = schwarz_from(m).ok();
    let s_raw = schwarz_raw_from(m)?;
    let h = higher_order_from(m)?;
    let mu_s = mode_estimate_from(ms, m.var_s).ok();
    let mu_i = mode_estimate_from(mi, m.var_i).ok();
    let eta = eta_from(m).ok();
    let r_theory = match (eta, mu_s, mu_i) {
        (Some(e), Some(a), Some(b)) => noise_reduction_theory(ms, mi, e, 0.5 * (a + b)).ok(),
        _ => None,
    };
    let diff_se = if m.weight.is_finite() {
        (m.var_diff / m.weight).sqrt()
    } else {
        0.0
    };
    let eta_bias_suspected = (ms - mi).abs() > 3.0 * diff_se;
    let tol = boundary_tol(m);
    Ok(CriteriaReport {
        shots: if m.weight.is_finite() { m.weight as u64 } else { 0 },
        mean_s: ms,
        mean_i: mi,
        c,
        r,
        r_theory,
        s,
        s_raw,
        h,
        fano_s: fano_from(ms, m.var_s)?,
        fano_i: fano_from(mi, m.var_i)?,
        mu_est_s: mu_s,
        mu_est_i: mu_i,
        eta_est: eta,
        eta_bias_suspected,
        sub_shot_noise_band: known_eta.map(|e| r >= 1.0 - e && r < 1.0 - tol),
        flags: Flags {
            r: Verdict::below(r, 1.0, tol),
            s: s.map_or(Verdict::Inconclusive, |v| Verdict::above(v, 1.0, tol)),
            h: Verdict::above(h, 1.0, tol),
        },
        errors: None,
    })
}

/// Full criteria report with optional bootstrap standard errors.
pub fn analyze(h: &crate::histogram::JointHistogram, opts: &AnalysisOptions) -> Result<CriteriaReport> {
    let m = h.moments()?;
    let mut report = report_from_moments(&m, opts.known_eta)?;
    if opts.bootstrap > 0 {
        report.errors = Some(bootstrap_errors(h, opts.bootstrap, opts.seed)?);
    }
    Ok(report)
}
