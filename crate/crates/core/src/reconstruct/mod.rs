//! Recovery of the twin-beam model from a detected histogram.
//!
//! The five first- and second-moment equalities fix the efficiencies and the
//! per-mode occupations once the three mode counts are chosen, so the search runs
//! over `(ln μ_p, ln μ_s, ln μ_i)` only.

mod simplex;

pub use simplex::{minimize, SimplexResult};

use crate::criteria::{mode_estimate_from, Moments};
use crate::dist::{
    detected_twb_distribution, joint_twb_distribution, JointDistribution, Level, ModeParams, TwbModel,
    TAIL_TOL,
};
use crate::error::{Error, Result};
use crate::histogram::JointHistogram;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const INFEASIBLE: f64 = 1e3;
const MU_BOUNDS: (f64, f64) = (1e-7, 1e6);

/// Unbiased sample moments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMoments {
    pub mean_s: f64,
    pub mean_i: f64,
    pub var_s: f64,
    pub var_i: f64,
    pub cov: f64,
}

impl EmpiricalMoments {
    pub fn correlation(&self) -> f64 {
        self.cov / (self.var_s * self.var_i).sqrt()
    }
}

pub fn empirical_moments(h: &JointHistogram) -> Result<EmpiricalMoments> {
    if h.shots() < 2 {
        return Err(Error::InsufficientData {
            required: 2,
            found: h.shots(),
        });
    }
    let m = Moments::from_histogram(h)?;
    let n = h.shots() as f64;
    let k = n / (n - 1.0);
    Ok(EmpiricalMoments {
        mean_s: m.mean_s(),
        mean_i: m.mean_i(),
        var_s: m.var_s * k,
        var_i: m.var_i * k,
        cov: m.cov * k,
    })
}

/// Exact detected moments implied by a model.
pub fn model_moments(m: &TwbModel<f64>) -> EmpiricalMoments {
    let p = m.paired.mean();
    let (ns, ni) = (m.noise_s.mean(), m.noise_i.mean());
    let excess = |eta: f64, noise: &ModeParams<f64>| eta * eta * (p * m.paired.b + noise.mean() * noise.b);
    let ms = m.eta_s * (p + ns);
    let mi = m.eta_i * (p + ni);
    EmpiricalMoments {
        mean_s: ms,
        mean_i: mi,
        var_s: ms + excess(m.eta_s, &m.noise_s),
        var_i: mi + excess(m.eta_i, &m.noise_i),
        cov: m.eta_s * m.eta_i * m.paired.variance(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub min_shots: u64,
    pub restarts: usize,
    pub objective_tol: f64,
    pub max_evals: usize,
    pub tail_tol: f64,
    /// Noise components with fewer modes than this are flagged as weakly identified.
    pub weak_mode_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            min_shots: 1000,
            restarts: 20,
            objective_tol: 1e-8,
            max_evals: 4000,
            tail_tol: TAIL_TOL,
            weak_mode_floor: 1e-5,
        }
    }
}

/// Photon-level quantities of a reconstructed model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedStatistics {
    /// Covariance normalized by the standard deviations.
    pub photon_covariance: f64,
    pub photon_covariance_raw: f64,
    #[serde(rename = "photon_R")]
    pub photon_r: f64,
    /// Share of photons that belong to pairs, `2μ_p b_p / (2μ_p b_p + μ_s b_s + μ_i b_i)`.
    pub pairing_fraction: f64,
    /// Pairs per noise-or-pair component, `μ_p b_p / (μ_p b_p + μ_s b_s + μ_i b_i)`.
    pub pair_component_fraction: f64,
    pub diagonal_weight: f64,
    pub mean_pairs: f64,
    pub mean_paired_photons: f64,
    /// Largest off-diagonal probability relative to the largest diagonal one.
    pub off_diagonal_peak_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitFlags {
    pub weak_noise_s: bool,
    pub weak_noise_i: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionResult {
    pub model: TwbModel<f64>,
    pub residual: f64,
    pub evaluations: usize,
    pub converged_restarts: usize,
    pub flags: FitFlags,
    pub derived: DerivedStatistics,
    #[serde(skip)]
    pub photon_dist: JointDistribution<f64>,
}

impl ReconstructionResult {
    /// Assembles a result for `model`, computing the photon distribution and derived block.
    pub fn from_model(model: TwbModel<f64>, residual: f64, tail_tol: f64) -> Result<Self> {
        let photon_dist = joint_twb_distribution(&model, tail_tol)?;
        let mut r = Self {
            model,
            residual,
            evaluations: 0,
            converged_restarts: 0,
            flags: FitFlags {
                weak_noise_s: false,
                weak_noise_i: false,
            },
            derived: photon_statistics_of(&model, &photon_dist)?,
            photon_dist,
        };
        r.flags = flags_for(&model, FitOptions::default().weak_mode_floor);
        Ok(r)
    }

    /// Recomputes the photon distribution, e.g. after deserialization.
    pub fn rebuild_photon_dist(&mut self, tail_tol: f64) -> Result<()> {
        self.photon_dist = joint_twb_distribution(&self.model, tail_tol)?;
        Ok(())
    }
}

impl Default for JointDistribution<f64> {
    fn default() -> Self {
        JointDistribution::new(Array2::zeros((0, 0)), Level::Photons)
    }
}

fn flags_for(m: &TwbModel<f64>, floor: f64) -> FitFlags {
    FitFlags {
        weak_noise_s: m.noise_s.mu < floor,
        weak_noise_i: m.noise_i.mu < floor,
    }
}

/// Derived photon-level block of a reconstruction.
pub fn photon_statistics(r: &ReconstructionResult) -> Result<DerivedStatistics> {
    photon_statistics_of(&r.model, &r.photon_dist)
}

fn photon_statistics_of(m: &TwbModel<f64>, p: &JointDistribution<f64>) -> Result<DerivedStatistics> {
    let mo = Moments::from_distribution(p)?;
    let total = mo.mean_s() + mo.mean_i();
    let pairs = m.paired.mean();
    let (ns, ni) = (m.noise_s.mean(), m.noise_i.mean());
    let n = p.rows().min(p.cols());
    let diag_max = (0..n).map(|k| p.probs[[k, k]]).fold(0.0, f64::max);
    let off_max = p
        .probs
        .indexed_iter()
        .filter(|((a, b), _)| a != b)
        .map(|(_, &v)| v)
        .fold(0.0, f64::max);
    let frac = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    Ok(DerivedStatistics {
        photon_covariance: frac(mo.cov, (mo.var_s * mo.var_i).sqrt()),
        photon_covariance_raw: mo.cov,
        photon_r: frac(mo.var_diff, total),
        pairing_fraction: frac(2.0 * pairs, 2.0 * pairs + ns + ni),
        pair_component_fraction: frac(pairs, pairs + ns + ni),
        diagonal_weight: p.diagonal_weight(),
        mean_pairs: pairs,
        mean_paired_photons: 2.0 * pairs,
        off_diagonal_peak_ratio: frac(off_max, diag_max),
    })
}

/// Positive roots `x = η P` of one arm's variance constraint, restricted to `0 < x ≤ M`.
fn arm_roots(mean: f64, excess: f64, mu_p: f64, mu_n: f64) -> Vec<f64> {
    let a = 1.0 / mu_p + 1.0 / mu_n;
    let b = -2.0 * mean / mu_n;
    let c = mean * mean / mu_n - excess;
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (b - sq);
    let mut roots = vec![q / a];
    if q != 0.0 {
        roots.push(c / q);
    }
    roots
        .into_iter()
        .filter(|&x| x > 0.0 && x <= mean * (1.0 + 1e-12))
        .map(|x| x.min(mean))
        .collect()
}

/// Models with mode counts `mu` that reproduce the target moments exactly.
pub fn constrained_models(target: &EmpiricalMoments, mu: [f64; 3]) -> Vec<TwbModel<f64>> {
    let [mu_p, mu_s, mu_i] = mu;
    let es = target.var_s - target.mean_s;
    let ei = target.var_i - target.mean_i;
    let mut out = Vec::new();
    for xs in arm_roots(target.mean_s, es, mu_p, mu_s) {
        for xi in arm_roots(target.mean_i, ei, mu_p, mu_i) {
            let den = target.cov - xs * xi / mu_p;
            if !(den > 0.0) {
                continue;
            }
            let p = xs * xi / den;
            let (eta_s, eta_i) = (xs / p, xi / p);
            if !(eta_s > 0.0 && eta_s <= 1.0 && eta_i > 0.0 && eta_i <= 1.0) {
                continue;
            }
            let ns = ((target.mean_s - xs) / eta_s).max(0.0);
            let ni = ((target.mean_i - xi) / eta_i).max(0.0);
            out.push(TwbModel {
                paired: ModeParams {
                    mu: mu_p,
                    b: p / mu_p,
                },
                noise_s: ModeParams {
                    mu: mu_s,
                    b: ns / mu_s,
                },
                noise_i: ModeParams {
                    mu: mu_i,
                    b: ni / mu_i,
                },
                eta_s,
                eta_i,
            });
        }
    }
    out
}

/// Weighted squared deviation over bins with at least one count.
pub fn declination(freq: &Array2<f64>, observed: &Array2<u64>, shots: f64, theory: &Array2<f64>) -> f64 {
    let floor = 1.0 / shots;
    let mut acc = 0.0;
    for ((a, b), &c) in observed.indexed_iter() {
        if c == 0 {
            continue;
        }
        let f = freq[[a, b]];
        let d = f - theory[[a, b]];
        acc += d * d / f.max(floor);
    }
    acc
}

struct Problem<'a> {
    target: EmpiricalMoments,
    freq: Array2<f64>,
    observed: &'a Array2<u64>,
    shots: f64,
    tail_tol: f64,
}

impl Problem<'_> {
    fn evaluate(&self, log_mu: &[f64]) -> (f64, Option<TwbModel<f64>>) {
        let mu = [log_mu[0].exp(), log_mu[1].exp(), log_mu[2].exp()];
        if mu.iter().any(|&m| !(m >= MU_BOUNDS.0 && m <= MU_BOUNDS.1)) {
            return (INFEASIBLE, None);
        }
        let (rows, cols) = self.freq.dim();
        let mut best: (f64, Option<TwbModel<f64>>) = (INFEASIBLE, None);
        for m in constrained_models(&self.target, mu) {
            let Ok(th) = detected_twb_distribution(&m, rows, cols, self.tail_tol) else {
                continue;
            };
            let v = declination(&self.freq, self.observed, self.shots, &th.probs);
            if v.is_finite() && v < best.0 {
                best = (v, Some(m));
            }
        }
        best
    }
}

fn lexicographic(m: &TwbModel<f64>) -> [f64; 8] {
    [
        m.paired.mu,
        m.paired.b,
        m.noise_s.mu,
        m.noise_s.b,
        m.noise_i.mu,
        m.noise_i.b,
        m.eta_s,
        m.eta_i,
    ]
}

/// Starting mode counts, log-spaced, with the marginal mode estimate as the first paired value.
fn starting_points(h_mom: &EmpiricalMoments, restarts: usize) -> Vec<[f64; 3]> {
    let mut paired = vec![3.0, 10.0, 30.0, 100.0, 300.0];
    let est = [(h_mom.mean_s, h_mom.var_s), (h_mom.mean_i, h_mom.var_i)]
        .iter()
        .filter_map(|&(m, v)| mode_estimate_from(m, v).ok())
        .collect::<Vec<_>>();
    if !est.is_empty() {
        let mean_est = est.iter().sum::<f64>() / est.len() as f64;
        if mean_est.is_finite() && mean_est > 0.0 {
            paired[0] = mean_est.clamp(1e-3, 1e5);
        }
    }
    let noise = [1e-4, 1e-3, 1e-2, 1e-1];
    let mut out = Vec::new();
    for &p in &paired {
        for &n in &noise {
            out.push([p, n, n]);
        }
    }
    out.truncate(restarts.max(1));
    let mut k = 0;
    while out.len() < restarts {
        let base = out[k % 20];
        out.push([base[0] * 1.7, base[1] * 3.0, base[2] * 0.3]);
        k += 1;
    }
    out
}

/// Fits the twin-beam model to a detected histogram.
pub fn fit_model(h: &JointHistogram, opts: &FitOptions) -> Result<ReconstructionResult> {
    if h.shots() < opts.min_shots {
        return Err(Error::InsufficientData {
            required: opts.min_shots,
            found: h.shots(),
        });
    }
    let target = empirical_moments(h)?;
    if !(target.var_s > target.mean_s && target.var_i > target.mean_i) {
        return Err(Error::ModelMismatch("marginals are not super-Poissonian".into()));
    }
    if !(target.cov > 0.0) {
        return Err(Error::ModelMismatch("covariance is not positive".into()));
    }
    let trimmed = h.trimmed();
    let shots = trimmed.shots() as f64;
    let problem = Problem {
        target,
        freq: trimmed.counts().mapv(|c| c as f64 / shots),
        observed: trimmed.counts(),
        shots,
        tail_tol: opts.tail_tol,
    };
    let starts = starting_points(&target, opts.restarts);
    let runs: Vec<(SimplexResult, Option<TwbModel<f64>>)> = starts
        .par_iter()
        .map(|s| {
            let x0 = [s[0].ln(), s[1].ln(), s[2].ln()];
            let r = minimize(
                |x| problem.evaluate(x).0,
                &x0,
                0.7,
                opts.objective_tol,
                1e-4,
                opts.max_evals,
            );
            let model = problem.evaluate(&r.x).1;
            (r, model)
        })
        .collect();

    let evaluations = runs.iter().map(|(r, _)| r.evaluations).sum();
    let converged_restarts = runs.iter().filter(|(r, m)| r.converged && m.is_some()).count();
    let mut feasible: Vec<(&SimplexResult, TwbModel<f64>)> =
        runs.iter().filter_map(|(r, m)| m.map(|m| (r, m))).collect();
    if feasible.is_empty() {
        return Err(Error::ModelMismatch(
            "no mode counts reproduce the measured moments".into(),
        ));
    }
    feasible.sort_by(|a, b| {
        a.0.fx.total_cmp(&b.0.fx).then_with(|| {
            let (la, lb) = (lexicographic(&a.1), lexicographic(&b.1));
            la.iter()
                .zip(&lb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let (best_run, best_model) = feasible[0];
    let mut result = ReconstructionResult::from_model(best_model, best_run.fx, opts.tail_tol)?;
    result.evaluations = evaluations;
    result.converged_restarts = converged_restarts;
    result.flags = flags_for(&best_model, opts.weak_mode_floor);
    if converged_restarts == 0 {
        return Err(Error::NonConvergence {
            residual: result.residual,
            best: Box::new(result),
        });
    }
    Ok(result)
}
