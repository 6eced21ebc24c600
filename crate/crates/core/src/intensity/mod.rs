//! Intensity quasi-distributions from count distributions.
//!
//! A count law `p(n)` and its quasi-distribution `P(W)` are linked by the Poisson
//! transform `p(n) = ∫ e^(−W) W^n/n! P(W) dW`. Expanding `P` in Laguerre polynomials
//! turns the inversion into the binomial transform `a_k = Σ_j (−1)^j C(k,j) p(j)`.

mod contour;
mod laguerre;

pub use contour::zero_contours;
pub use laguerre::{gamma_density, gamma_density_coeffs, gamma_difference_coeffs, laguerre_values};

use crate::dist::{mandel_rice_cutoff, mandel_rice_vec, Distribution1D, JointDistribution, Level, TwbModel};
use crate::error::{Error, Result};
use crate::histogram::JointHistogram;
use crate::scalar::{kahan_sum, Real};
use laguerre::{convolve_cols, convolve_rows, signed_binomials, transform_1d, transform_2d};
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Ladder searched by [`Damping::Auto`], from no damping downwards.
const AUTO_LADDER: [f64; 20] = [
    1.0, 0.95, 0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5, 0.45, 0.4, 0.35, 0.3, 0.25, 0.2, 0.15, 0.1,
    0.05,
];

/// Series truncation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesOrder {
    /// Largest count with nonzero probability on each axis.
    Support,
    Fixed(usize),
    PerAxis(usize, usize),
    /// Largest order whose coefficients have bootstrap-free standard errors below the bound;
    /// only meaningful for histograms.
    NoiseLimited {
        max_std_error: f64,
    },
}

/// Geometric factor `q^k` applied to the coefficients.
///
/// For `q < 1` this equals smoothing with a positive kernel, so classical inputs stay
/// nonnegative while negativity depth shrinks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Damping {
    None,
    Geometric(f64),
    /// Largest `q` on a fixed ladder for which the series is convergent and stable
    /// against dropping its last five orders.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    pub order: SeriesOrder,
    pub damping: Damping,
    /// Largest tolerated relative rounding error of any coefficient.
    pub cancellation_tol: f64,
    /// Boundary coefficients larger than this mark a divergent series.
    pub singular_threshold: f64,
    /// Relative sup-norm change tolerated when the last five orders are dropped (auto damping).
    pub stability_tol: f64,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        Self {
            order: SeriesOrder::Support,
            damping: Damping::None,
            cancellation_tol: 1e-6,
            singular_threshold: 0.5,
            stability_tol: 1e-2,
        }
    }
}

impl SeriesOptions {
    pub fn fixed(order: usize) -> Self {
        Self {
            order: SeriesOrder::Fixed(order),
            ..Self::default()
        }
    }

    pub fn with_damping(mut self, damping: Damping) -> Self {
        self.damping = damping;
        self
    }
}

/// Sampling of the intensity axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub points: usize,
    /// Upper end of both axes; defaults to five times the mean count plus one, per axis.
    pub w_max: Option<(f64, f64)>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            points: 201,
            w_max: None,
        }
    }
}

impl GridSpec {
    pub fn new(points: usize, w_max: f64) -> Self {
        Self {
            points,
            w_max: Some((w_max, w_max)),
        }
    }

    fn axes<T: Real>(&self, means: (T, T)) -> Result<(Vec<T>, Vec<T>)> {
        let (ws, wi) = self.w_max.unwrap_or_else(|| {
            (
                5.0 * (means.0.to_f64_lossy() + 1.0),
                5.0 * (means.1.to_f64_lossy() + 1.0),
            )
        });
        Ok((uniform_axis(ws, self.points)?, uniform_axis(wi, self.points)?))
    }
}

/// `points` equally spaced samples on `[0, w_max]`.
pub fn uniform_axis<T: Real>(w_max: f64, points: usize) -> Result<Vec<T>> {
    if points < 2 || !(w_max > 0.0) || !w_max.is_finite() {
        return Err(Error::Config(format!(
            "axis needs at least two points and a positive extent, got {points} points to {w_max}"
        )));
    }
    let h = w_max / (points - 1) as f64;
    Ok((0..points).map(|k| T::lit(k as f64 * h)).collect())
}

/// Which field a grid describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Photons,
    /// Detected counts treated as photons of a lossless detector.
    DetectedPhotons,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaguerreSeries1D<T = f64> {
    /// Damped coefficients.
    pub coeffs: Vec<T>,
    pub damping: T,
    /// Estimated relative rounding error per coefficient.
    pub error_estimates: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaguerreSeries2D<T = f64> {
    pub coeffs: Array2<T>,
    pub damping: T,
    pub max_error_estimate: T,
    /// Absolute rounding error of each coefficient, damped along with it.
    pub abs_errors: Array2<T>,
}

impl<T: Real> LaguerreSeries2D<T> {
    pub fn orders(&self) -> (usize, usize) {
        let (a, b) = self.coeffs.dim();
        (a - 1, b - 1)
    }

    /// Largest coefficient magnitude on the last row or column.
    pub fn boundary(&self) -> T {
        let (ks, ki) = self.orders();
        let row = self.coeffs.row(ks).iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        let col = self
            .coeffs
            .column(ki)
            .iter()
            .fold(T::zero(), |m, &v| m.max(v.abs()));
        row.max(col)
    }

    /// Coefficients scaled by a further `q^(k+l)`.
    pub fn damped(&self, q: T) -> Self {
        let coeffs = Array2::from_shape_fn(self.coeffs.dim(), |(k, l)| {
            self.coeffs[[k, l]] * q.powi((k + l) as i32)
        });
        let abs_errors = Array2::from_shape_fn(self.coeffs.dim(), |(k, l)| {
            self.abs_errors[[k, l]] * q.powi((k + l) as i32)
        });
        Self::with_errors(coeffs, self.damping * q, abs_errors)
    }

    /// Leading `(ks + 1) × (ki + 1)` block.
    pub fn truncated(&self, ks: usize, ki: usize) -> Self {
        Self::with_errors(
            self.coeffs.slice(ndarray::s![..=ks, ..=ki]).to_owned(),
            self.damping,
            self.abs_errors.slice(ndarray::s![..=ks, ..=ki]).to_owned(),
        )
    }

    fn with_errors(coeffs: Array2<T>, damping: T, abs_errors: Array2<T>) -> Self {
        let mut s = Self {
            coeffs,
            damping,
            max_error_estimate: T::zero(),
            abs_errors,
        };
        s.max_error_estimate = s.error_estimates().fold(T::zero(), |m, (_, e)| m.max(e));
        s
    }

    /// Error of each coefficient relative to the larger of itself and `a_00`.
    fn error_estimates(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        let scale = self.coeffs[[0, 0]].abs().max(T::min_positive_value());
        self.abs_errors
            .indexed_iter()
            .map(move |(i, &e)| (i, e / self.coeffs[i].abs().max(scale)))
    }

    /// Fails with the first coefficient whose relative error estimate exceeds `tol`.
    pub fn check_cancellation(&self, tol: f64) -> Result<()> {
        for (i, e) in self.error_estimates() {
            check_tolerance(e, tol, i)?;
        }
        Ok(())
    }

    /// `P(W_s, W_i) = Σ a_kl L_k(W_s) L_l(W_i)` on the product of the axes.
    pub fn evaluate(&self, axis_s: &[T], axis_i: &[T]) -> Array2<T> {
        let (ks, ki) = self.orders();
        let ls: Vec<Vec<T>> = axis_s.par_iter().map(|&w| laguerre_values(w, ks)).collect();
        let li: Vec<Vec<T>> = axis_i.par_iter().map(|&w| laguerre_values(w, ki)).collect();
        let rows: Vec<Vec<T>> = ls
            .par_iter()
            .map(|lk| {
                let g: Vec<T> = (0..=ki)
                    .map(|l| kahan_sum((0..=ks).map(|k| lk[k] * self.coeffs[[k, l]])))
                    .collect();
                li.iter()
                    .map(|ll| kahan_sum(g.iter().zip(ll).map(|(&a, &b)| a * b)))
                    .collect()
            })
            .collect();
        Array2::from_shape_fn((axis_s.len(), axis_i.len()), |(p, q)| rows[p][q])
    }
}

/// One-dimensional quasi-distribution samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityProfile<T = f64> {
    pub axis: Vec<T>,
    pub values: Vec<T>,
    pub order: usize,
    pub damping: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridFlags {
    pub damped: bool,
    pub auto_damping: bool,
}

/// Quasi-distribution sampled on `axis_s × axis_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityGrid<T = f64> {
    pub axis_s: Vec<T>,
    pub axis_i: Vec<T>,
    pub values: Array2<T>,
    pub order_s: usize,
    pub order_i: usize,
    pub damping: T,
    pub field: FieldKind,
    pub flags: GridFlags,
}

impl<T: Real> IntensityGrid<T> {
    /// Same grid with every value negated.
    pub fn negated(&self) -> Self {
        let mut g = self.clone();
        g.values.mapv_inplace(|v| -v);
        g
    }

    pub fn max(&self) -> (T, (T, T)) {
        let (v, (p, q)) = extreme(&self.values, |a, b| a > b);
        (v, (self.axis_s[p], self.axis_i[q]))
    }

    pub fn min(&self) -> (T, (T, T)) {
        let (v, (p, q)) = extreme(&self.values, |a, b| a < b);
        (v, (self.axis_s[p], self.axis_i[q]))
    }

    /// Value at the origin.
    pub fn origin(&self) -> T {
        self.values[[0, 0]]
    }
}

fn extreme<T: Real>(v: &Array2<T>, better: impl Fn(T, T) -> bool) -> (T, (usize, usize)) {
    let mut best = (v[[0, 0]], (0, 0));
    for (idx, &x) in v.indexed_iter() {
        if better(x, best.0) {
            best = (x, idx);
        }
    }
    best
}

fn check_tolerance<T: Real>(estimate: T, tol: f64, index: (usize, usize)) -> Result<()> {
    let e = estimate.to_f64_lossy();
    if !(e <= tol) {
        return Err(Error::Precision {
            estimate: e,
            tolerance: tol,
            index,
        });
    }
    Ok(())
}

/// Index of the last nonzero entry (0 for an all-zero input).
fn support_end<T: Real>(p: &[T]) -> usize {
    p.iter().rposition(|&v| v != T::zero()).unwrap_or(0)
}

/// Binomial-transform coefficients `a_k`, `k = 0..=order`, undamped.
pub fn laguerre_series_coeffs_1d<T: Real>(
    p: &Distribution1D<T>,
    order: usize,
    cancellation_tol: f64,
) -> Result<LaguerreSeries1D<T>> {
    if p.offset != 0 {
        return Err(Error::ParameterDomain(
            "inversion needs a count distribution with zero offset".into(),
        ));
    }
    let a = signed_binomials::<T>(order, order.min(p.len().saturating_sub(1)))?;
    let (coeffs, mag) = transform_1d(&a, &p.probs);
    let eps = T::epsilon();
    let abs_errors: Vec<T> = mag.iter().map(|&m| eps * m).collect();
    let error_estimates = relative_errors_1d(&coeffs, &abs_errors, cancellation_tol)?;
    Ok(LaguerreSeries1D {
        coeffs,
        damping: T::one(),
        error_estimates,
    })
}

fn relative_errors_1d<T: Real>(coeffs: &[T], abs_errors: &[T], tol: f64) -> Result<Vec<T>> {
    let scale = coeffs
        .first()
        .map_or(T::one(), |c| c.abs())
        .max(T::min_positive_value());
    coeffs
        .iter()
        .zip(abs_errors)
        .enumerate()
        .map(|(k, (&c, &e))| {
            let r = e / c.abs().max(scale);
            check_tolerance(r, tol, (k, 0)).map(|_| r)
        })
        .collect()
}

fn resolve_q<T: Real>(damping: Damping) -> Result<T> {
    match damping {
        Damping::None | Damping::Auto => Ok(T::one()),
        Damping::Geometric(q) if q > 0.0 && q <= 1.0 => Ok(T::lit(q)),
        Damping::Geometric(q) => Err(Error::Config(format!(
            "damping factor must lie in (0, 1], got {q}"
        ))),
    }
}

/// Samples of `P(W) = Σ_k q^k a_k L_k(W)` on `axis`.
pub fn invert_mandel_1d<T: Real>(
    p: &Distribution1D<T>,
    opts: &SeriesOptions,
    axis: &[T],
) -> Result<IntensityProfile<T>> {
    let order = match opts.order {
        SeriesOrder::Support => support_end(&p.probs),
        SeriesOrder::Fixed(k) => k,
        SeriesOrder::PerAxis(k, _) => k,
        SeriesOrder::NoiseLimited { .. } => {
            return Err(Error::Config("noise-limited order needs a histogram".into()))
        }
    };
    let series = laguerre_series_coeffs_1d(p, order, f64::INFINITY)?;
    let q: T = resolve_q(opts.damping)?;
    let coeffs: Vec<T> = series
        .coeffs
        .iter()
        .enumerate()
        .map(|(k, &a)| a * q.powi(k as i32))
        .collect();
    let scale = series.coeffs[0].abs().max(T::min_positive_value());
    let abs_errors: Vec<T> = series
        .error_estimates
        .iter()
        .zip(&series.coeffs)
        .enumerate()
        .map(|(k, (&e, &c))| e * c.abs().max(scale) * q.powi(k as i32))
        .collect();
    relative_errors_1d(&coeffs, &abs_errors, opts.cancellation_tol)?;
    let boundary = coeffs[order].abs();
    if boundary.to_f64_lossy() > opts.singular_threshold {
        return Err(Error::SingularResult {
            order,
            boundary: boundary.to_f64_lossy(),
        });
    }
    let values = axis
        .iter()
        .map(|&w| {
            let l = laguerre_values(w, order);
            kahan_sum(coeffs.iter().zip(&l).map(|(&a, &b)| a * b))
        })
        .collect();
    Ok(IntensityProfile {
        axis: axis.to_vec(),
        values,
        order,
        damping: q,
    })
}

/// Two-dimensional binomial-transform coefficients, undamped.
pub fn laguerre_series_coeffs_2d<T: Real>(
    p: &JointDistribution<T>,
    order_s: usize,
    order_i: usize,
    cancellation_tol: f64,
) -> Result<LaguerreSeries2D<T>> {
    let series = series_2d(p, order_s, order_i)?;
    series.check_cancellation(cancellation_tol)?;
    Ok(series)
}

fn series_2d<T: Real>(
    p: &JointDistribution<T>,
    order_s: usize,
    order_i: usize,
) -> Result<LaguerreSeries2D<T>> {
    let (rows, cols) = p.probs.dim();
    let as_ = signed_binomials::<T>(order_s, order_s.min(rows.saturating_sub(1)))?;
    let ai = signed_binomials::<T>(order_i, order_i.min(cols.saturating_sub(1)))?;
    let (coeffs, mag) = transform_2d(&as_, &p.probs, &ai);
    let eps = T::epsilon();
    Ok(LaguerreSeries2D::with_errors(
        coeffs,
        T::one(),
        mag.mapv(|m| eps * m),
    ))
}

fn orders_for<T: Real>(p: &JointDistribution<T>, order: SeriesOrder) -> Result<(usize, usize)> {
    match order {
        SeriesOrder::Support => {
            let rows_end = p
                .probs
                .rows()
                .into_iter()
                .rposition(|r| r.iter().any(|&v| v != T::zero()))
                .unwrap_or(0);
            let cols_end = p
                .probs
                .columns()
                .into_iter()
                .rposition(|c| c.iter().any(|&v| v != T::zero()))
                .unwrap_or(0);
            Ok((rows_end, cols_end))
        }
        SeriesOrder::Fixed(k) => Ok((k, k)),
        SeriesOrder::PerAxis(a, b) => Ok((a, b)),
        SeriesOrder::NoiseLimited { .. } => {
            Err(Error::Config("noise-limited order needs a histogram".into()))
        }
    }
}

/// Applies the damping policy and the singularity guard, then evaluates on the axes.
fn finish_grid<T: Real>(
    series: LaguerreSeries2D<T>,
    opts: &SeriesOptions,
    axis_s: Vec<T>,
    axis_i: Vec<T>,
    field: FieldKind,
) -> Result<IntensityGrid<T>> {
    let (ks, ki) = series.orders();
    let threshold = T::lit(opts.singular_threshold);
    let (chosen, auto) = match opts.damping {
        Damping::Auto => {
            let mut found = None;
            for &q in AUTO_LADDER.iter() {
                let s = series.damped(T::lit(q));
                if s.boundary() > threshold || s.check_cancellation(opts.cancellation_tol).is_err() {
                    continue;
                }
                if ks < 5 || ki < 5 {
                    found = Some(s);
                    break;
                }
                let full = s.evaluate(&axis_s, &axis_i);
                let short = s.truncated(ks - 5, ki - 5).evaluate(&axis_s, &axis_i);
                let sup = full.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
                let diff = full
                    .iter()
                    .zip(short.iter())
                    .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
                if diff <= T::lit(opts.stability_tol) * sup {
                    found = Some(s);
                    break;
                }
            }
            match found {
                Some(s) => (s, true),
                None => {
                    return Err(Error::SingularResult {
                        order: ks.max(ki),
                        boundary: series.damped(T::lit(0.05)).boundary().to_f64_lossy(),
                    })
                }
            }
        }
        other => {
            let s = series.damped(resolve_q(other)?);
            s.check_cancellation(opts.cancellation_tol)?;
            (s, false)
        }
    };
    let boundary = chosen.boundary();
    if boundary > threshold {
        return Err(Error::SingularResult {
            order: ks.max(ki),
            boundary: boundary.to_f64_lossy(),
        });
    }
    let values = chosen.evaluate(&axis_s, &axis_i);
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularResult {
            order: ks.max(ki),
            boundary: f64::INFINITY,
        });
    }
    Ok(IntensityGrid {
        axis_s,
        axis_i,
        values,
        order_s: ks,
        order_i: ki,
        damping: chosen.damping,
        field,
        flags: GridFlags {
            damped: chosen.damping < T::one(),
            auto_damping: auto,
        },
    })
}

/// Quasi-distribution of a joint count distribution on a grid.
pub fn invert_mandel_2d<T: Real>(
    p: &JointDistribution<T>,
    opts: &SeriesOptions,
    grid: &GridSpec,
) -> Result<IntensityGrid<T>> {
    let (ks, ki) = orders_for(p, opts.order)?;
    let series = series_2d(p, ks, ki)?;
    let (axis_s, axis_i) = grid.axes(p.means())?;
    let field = match p.level {
        Level::Photons => FieldKind::Photons,
        Level::Detected => FieldKind::DetectedPhotons,
    };
    finish_grid(series, opts, axis_s, axis_i, field)
}

/// Largest common order whose damped coefficients carry standard errors below `max_std_error`.
///
/// The standard error of `a_kl` over `N` shots is `√((Σ C(k,j)² C(l,m)² f_jm − a_kl²)/N)`,
/// scaled by `q^(k+l)` for geometric damping (`q = 1` when undamped).
pub fn noise_limited_order(h: &JointHistogram, max_std_error: f64, q: f64) -> Result<usize> {
    if !(q > 0.0 && q <= 1.0) {
        return crate::error::domain(format!("damping factor {q} outside (0, 1]"));
    }
    let f = h.normalized()?;
    let n = h.shots() as f64;
    let (rows, cols) = f.probs.dim();
    let limit = rows.max(cols).saturating_sub(1);
    let mut best = 0;
    for k in 1..=limit {
        let a = signed_binomials::<f64>(k, k.min(rows - 1))?;
        let b = signed_binomials::<f64>(k, k.min(cols - 1))?;
        let a2 = a.mapv(|x| x * x);
        let b2 = b.mapv(|x| x * x);
        let (coef, _) = transform_2d(&a, &f.probs, &b);
        let (second, _) = transform_2d(&a2, &f.probs, &b2);
        let worst = coef
            .indexed_iter()
            .filter(|((x, y), _)| *x == k || *y == k)
            .map(|((x, y), &c)| ((second[[x, y]] - c * c).max(0.0) / n).sqrt() * q.powi((x + y) as i32))
            .fold(0.0, f64::max);
        if worst > max_std_error {
            break;
        }
        best = k;
    }
    Ok(best)
}

/// Quasi-distribution `P_m` of the detected counts, as if the detectors were lossless.
pub fn detected_intensity_quasi(
    h: &JointHistogram,
    opts: &SeriesOptions,
    grid: &GridSpec,
) -> Result<IntensityGrid<f64>> {
    let p = h.normalized()?;
    let mut o = *opts;
    if let SeriesOrder::NoiseLimited { max_std_error } = opts.order {
        let q = match opts.damping {
            Damping::Geometric(q) => q,
            _ => 1.0,
        };
        o.order = SeriesOrder::Fixed(noise_limited_order(h, max_std_error, q)?);
    }
    let mut g = invert_mandel_2d(&p, &o, grid)?;
    g.field = FieldKind::DetectedPhotons;
    Ok(g)
}

/// Damping for detected counts that smooths over the same photon-level intensity scale
/// as `q` does for photons, given the mean efficiency `eta`.
pub fn matched_damping(q: f64, eta: f64) -> f64 {
    q / (q + eta * (1.0 - q))
}

/// Photon-level quasi-distribution of a model assembled from its components: the
/// paired part is inverted on its own and then convolved with the two gamma densities
/// of the noise parts.
///
/// The convolution is carried out on Laguerre coefficients, where it is a causal
/// product, so truncating at the requested order is exact.
pub fn model_quasi_convolution(
    m: &TwbModel<f64>,
    opts: &SeriesOptions,
    grid: &GridSpec,
    tail_tol: f64,
) -> Result<IntensityGrid<f64>> {
    m.validate()?;
    let (ks, ki) = match opts.order {
        SeriesOrder::Fixed(k) => (k, k),
        SeriesOrder::PerAxis(a, b) => (a, b),
        SeriesOrder::Support => {
            let ns = crate::dist::component_sum_cutoff(&m.paired, &m.noise_s, tail_tol)?;
            let ni = crate::dist::component_sum_cutoff(&m.paired, &m.noise_i, tail_tol)?;
            (ns, ni)
        }
        SeriesOrder::NoiseLimited { .. } => {
            return Err(Error::Config("noise-limited order needs a histogram".into()))
        }
    };
    let np = mandel_rice_cutoff(&m.paired, tail_tol)?;
    let pp = mandel_rice_vec(&m.paired, np)?.probs;
    let mut paired = Array2::zeros((np + 1, np + 1));
    for (n, &v) in pp.iter().enumerate() {
        paired[[n, n]] = v;
    }
    let paired = JointDistribution::new(paired, Level::Photons);
    let base = series_2d(&paired, ks, ki)?;
    let ds = gamma_difference_coeffs(m.noise_s.mu, m.noise_s.b, ks);
    let di = gamma_difference_coeffs(m.noise_i.mu, m.noise_i.b, ki);
    let coeffs = convolve_cols(&convolve_rows(&base.coeffs, &ds), &di);
    let abs = |d: &[f64]| d.iter().map(|v| v.abs()).collect::<Vec<_>>();
    let abs_errors = convolve_cols(&convolve_rows(&base.abs_errors, &abs(&ds)), &abs(&di));
    let series = LaguerreSeries2D::with_errors(coeffs, 1.0, abs_errors);
    let (axis_s, axis_i) = grid.axes(m.photon_means())?;
    finish_grid(series, opts, axis_s, axis_i, FieldKind::Photons)
}

/// Composite Simpson weights on a uniform axis (3/8 rule on the last panel for an even
/// number of points); trapezoid weights otherwise.
fn quadrature_weights<T: Real>(axis: &[T]) -> Vec<T> {
    let n = axis.len();
    let mut w = vec![T::zero(); n];
    if n < 2 {
        return w;
    }
    let h = (axis[n - 1] - axis[0]) / T::from_count(n - 1);
    let uniform = axis
        .windows(2)
        .all(|p| ((p[1] - p[0]) - h).abs() <= h * T::lit(1e-9));
    if !uniform || n < 4 {
        for k in 0..n - 1 {
            let d = (axis[k + 1] - axis[k]) * T::lit(0.5);
            w[k] = w[k] + d;
            w[k + 1] = w[k + 1] + d;
        }
        return w;
    }
    let simpson_end = if (n - 1).is_multiple_of(2) { n - 1 } else { n - 4 };
    let third = h / T::lit(3.0);
    let mut k = 0;
    while k < simpson_end {
        w[k] = w[k] + third;
        w[k + 1] = w[k + 1] + T::lit(4.0) * third;
        w[k + 2] = w[k + 2] + third;
        k += 2;
    }
    if simpson_end < n - 1 {
        let e = T::lit(3.0) * h / T::lit(8.0);
        w[simpson_end] = w[simpson_end] + e;
        w[simpson_end + 1] = w[simpson_end + 1] + T::lit(3.0) * e;
        w[simpson_end + 2] = w[simpson_end + 2] + T::lit(3.0) * e;
        w[simpson_end + 3] = w[simpson_end + 3] + e;
    }
    w
}

const COVERAGE_TOL: f64 = 1e-8;

fn kernel_rows<T: Real>(axis: &[T], n_max: usize) -> Result<Array2<T>> {
    let w_max = axis.last().copied().unwrap_or_else(T::zero).to_f64_lossy();
    let uncovered = crate::special::poisson_cdf(n_max, w_max);
    if uncovered > COVERAGE_TOL {
        return Err(Error::Coverage(format!(
            "kernel mass {uncovered:e} for n = {n_max} lies beyond W = {w_max}"
        )));
    }
    let weights = quadrature_weights(axis);
    let ln_fact = crate::special::ln_factorial_table::<T>(n_max);
    Ok(Array2::from_shape_fn((n_max + 1, axis.len()), |(n, p)| {
        let w = axis[p];
        let k = if w == T::zero() {
            if n == 0 {
                T::one()
            } else {
                T::zero()
            }
        } else {
            (T::from_count(n) * w.ln() - w - ln_fact[n]).exp()
        };
        k * weights[p]
    }))
}

/// Poisson transform of sampled 1D values, `p(n) = ∫ e^(−W) W^n/n! P(W) dW`, `n ≤ n_max`.
pub fn forward_mandel_check_1d<T: Real>(
    profile: &IntensityProfile<T>,
    n_max: usize,
) -> Result<Distribution1D<T>> {
    let k = kernel_rows(&profile.axis, n_max)?;
    let probs = (0..=n_max)
        .map(|n| kahan_sum(k.row(n).iter().zip(&profile.values).map(|(&a, &b)| a * b)))
        .collect();
    Ok(Distribution1D::new(probs))
}

/// Two-dimensional Poisson transform of a grid.
pub fn forward_mandel_check_2d<T: Real>(
    grid: &IntensityGrid<T>,
    ns_max: usize,
    ni_max: usize,
) -> Result<JointDistribution<T>> {
    let ks = kernel_rows(&grid.axis_s, ns_max)?;
    let ki = kernel_rows(&grid.axis_i, ni_max)?;
    let (np, nq) = grid.values.dim();
    let stage = Array2::from_shape_fn((ns_max + 1, nq), |(n, q)| {
        kahan_sum((0..np).map(|p| ks[[n, p]] * grid.values[[p, q]]))
    });
    let probs = Array2::from_shape_fn((ns_max + 1, ni_max + 1), |(n, m)| {
        kahan_sum((0..nq).map(|q| stage[[n, q]] * ki[[m, q]]))
    });
    let level = match grid.field {
        FieldKind::Photons => Level::Photons,
        FieldKind::DetectedPhotons => Level::Detected,
    };
    Ok(JointDistribution::new(probs, level))
}

/// How sign changes are distributed along and across the main diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripGeometry {
    /// Sign changes between neighbours offset by `(+1, +1)` grid steps.
    pub along_diagonal: usize,
    /// Sign changes between neighbours offset by `(+1, −1)` grid steps.
    pub across_diagonal: usize,
    /// `along / across`; small values mean strips running parallel to the diagonal.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegativityReport<T = f64> {
    pub min_value: T,
    pub min_location: (T, T),
    pub max_value: T,
    pub max_location: (T, T),
    pub negative_fraction: T,
    pub zero_contours: Vec<Vec<(T, T)>>,
    pub strips: StripGeometry,
}

/// Negativity statistics of a grid; points below `−eps_neg` count as negative.
pub fn negativity_report<T: Real>(grid: &IntensityGrid<T>, eps_neg: T) -> NegativityReport<T> {
    let (min_value, min_location) = grid.min();
    let (max_value, max_location) = grid.max();
    let total = grid.values.len();
    let neg = grid.values.iter().filter(|&&v| v < -eps_neg).count();
    let v = &grid.values;
    let (np, nq) = v.dim();
    let class = |x: T| -> i8 {
        if x < -eps_neg {
            -1
        } else if x > eps_neg {
            1
        } else {
            0
        }
    };
    let mut along = 0;
    let mut across = 0;
    for p in 0..np.saturating_sub(1) {
        for q in 0..nq {
            let c = class(v[[p, q]]);
            if q + 1 < nq {
                let d = class(v[[p + 1, q + 1]]);
                if c * d < 0 {
                    along += 1;
                }
            }
            if q >= 1 {
                let d = class(v[[p + 1, q - 1]]);
                if c * d < 0 {
                    across += 1;
                }
            }
        }
    }
    NegativityReport {
        min_value,
        min_location,
        max_value,
        max_location,
        negative_fraction: T::from_count(neg) / T::from_count(total),
        zero_contours: zero_contours(&grid.values, &grid.axis_s, &grid.axis_i),
        strips: StripGeometry {
            along_diagonal: along,
            across_diagonal: across,
            ratio: (across > 0).then(|| along as f64 / across as f64),
        },
    }
}
