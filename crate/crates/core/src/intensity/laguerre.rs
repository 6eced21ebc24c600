//! Laguerre-series kernels: binomial transforms, polynomial evaluation and the
//! coefficient sequence of a gamma density.

use crate::error::{Error, Result};
use crate::scalar::{KahanSum, Real};
use ndarray::Array2;

/// Signed binomial matrix `A[[k, j]] = (−1)^j C(k, j)` for `k ≤ k_max`, `j ≤ j_max`,
/// built by Pascal's rule so that every entry below `2^mantissa` is exact.
pub(crate) fn signed_binomials<T: Real>(k_max: usize, j_max: usize) -> Result<Array2<T>> {
    let mut a = Array2::zeros((k_max + 1, j_max + 1));
    let mut row = vec![T::zero(); j_max + 1];
    row[0] = T::one();
    for k in 0..=k_max {
        if k > 0 {
            for j in (1..=k.min(j_max)).rev() {
                row[j] = row[j] + row[j - 1];
            }
        }
        for j in 0..=k.min(j_max) {
            if !row[j].is_finite() {
                return Err(Error::Precision {
                    estimate: f64::INFINITY,
                    tolerance: 0.0,
                    index: (k, j),
                });
            }
            a[[k, j]] = if j % 2 == 0 { row[j] } else { -row[j] };
        }
    }
    Ok(a)
}

/// Rounding units carried by a binomial entry: none while it is an exact integer, at most
/// one per Pascal level beyond that.
fn binomial_units<T: Real>(c: T, k: usize) -> T {
    if c.abs() * T::epsilon() < T::one() {
        T::zero()
    } else {
        T::from_count(k)
    }
}

/// `Σ_j A[k, j] x[j]` with compensated sums, plus its rounding error in units of machine
/// epsilon: each term carries its binomial units plus one each for `x` and the product,
/// the compensated sum adds two, and the per-term errors are combined root-sum-square.
pub(crate) fn transform_1d<T: Real>(a: &Array2<T>, x: &[T]) -> (Vec<T>, Vec<T>) {
    let (rows, cols) = a.dim();
    let n = cols.min(x.len());
    let mut out = Vec::with_capacity(rows);
    let mut mag = Vec::with_capacity(rows);
    let four = T::lit(4.0);
    for k in 0..rows {
        let mut s = KahanSum::new();
        let mut m = T::zero();
        for j in 0..n {
            let t = a[[k, j]] * x[j];
            s.add(t);
            let u = t.abs() * (binomial_units(a[[k, j]], k) + four);
            m = m + u * u;
        }
        out.push(s.value());
        mag.push(m.sqrt());
    }
    (out, mag)
}

/// `A_s · P · A_iᵀ` with compensated sums and the rounding estimate of [`transform_1d`]
/// propagated through both stages.
pub(crate) fn transform_2d<T: Real>(
    as_: &Array2<T>,
    p: &Array2<T>,
    ai: &Array2<T>,
) -> (Array2<T>, Array2<T>) {
    let (ks, js) = as_.dim();
    let (ki, ji) = ai.dim();
    let (rows, cols) = p.dim();
    let rs = js.min(rows);
    let ci = ji.min(cols);
    let four = T::lit(4.0);
    let three = T::lit(3.0);
    let mut stage = Array2::<T>::zeros((ks, ci));
    let mut stage_mag = Array2::<T>::zeros((ks, ci));
    for k in 0..ks {
        for m in 0..ci {
            let mut s = KahanSum::new();
            let mut mg = T::zero();
            for j in 0..=k.min(rs.saturating_sub(1)) {
                if j >= rs {
                    break;
                }
                let c = as_[[k, j]];
                let t = c * p[[j, m]];
                s.add(t);
                let u = t.abs() * (binomial_units(c, k) + four);
                mg = mg + u * u;
            }
            stage[[k, m]] = s.value();
            stage_mag[[k, m]] = mg.sqrt();
        }
    }
    let mut out = Array2::<T>::zeros((ks, ki));
    let mut mag = Array2::<T>::zeros((ks, ki));
    for k in 0..ks {
        for l in 0..ki {
            let mut s = KahanSum::new();
            let mut mg = T::zero();
            for m in 0..=l.min(ci.saturating_sub(1)) {
                if m >= ci {
                    break;
                }
                let w = ai[[l, m]];
                let v = stage[[k, m]];
                s.add(v * w);
                let carried = w.abs() * stage_mag[[k, m]];
                let own = (v * w).abs() * (binomial_units(w, l) + three);
                mg = mg + carried * carried + own * own;
            }
            out[[k, l]] = s.value();
            mag[[k, l]] = mg.sqrt();
        }
    }
    (out, mag)
}

/// `L_0(x) … L_k_max(x)` by the three-term recurrence.
pub fn laguerre_values<T: Real>(x: T, k_max: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(k_max + 1);
    out.push(T::one());
    if k_max == 0 {
        return out;
    }
    out.push(T::one() - x);
    for k in 1..k_max {
        let kk = T::from_count(k);
        let next = ((kk + kk + T::one() - x) * out[k] - kk * out[k - 1]) / (kk + T::one());
        out.push(next);
    }
    out
}

/// Laguerre coefficients of `(1 − t)` times the generating function of a gamma density
/// with shape `mu` and scale `b`, i.e. of `((1 − t)/(1 + b − t))^μ`.
///
/// Their running sum gives the coefficients of the density itself; the unsummed form is
/// what convolution in `W` multiplies by.
pub fn gamma_difference_coeffs<T: Real>(mu: T, b: T, k_max: usize) -> Vec<T> {
    let mut d = Vec::with_capacity(k_max + 1);
    let one = T::one();
    d.push((-mu * b.ln_1p()).exp());
    if k_max == 0 {
        return d;
    }
    let denom = one + b;
    d.push(-mu * b * d[0] / denom);
    for k in 1..k_max {
        let kk = T::from_count(k);
        let next = (((T::lit(2.0) + b) * kk - mu * b) * d[k] - (kk - one) * d[k - 1]) / (denom * (kk + one));
        d.push(next);
    }
    d
}

/// Laguerre coefficients of the gamma density `W^(μ−1) e^(−W/b) / (Γ(μ) b^μ)`.
pub fn gamma_density_coeffs<T: Real>(mu: T, b: T, k_max: usize) -> Vec<T> {
    let mut acc = T::zero();
    gamma_difference_coeffs(mu, b, k_max)
        .into_iter()
        .map(|d| {
            acc = acc + d;
            acc
        })
        .collect()
}

/// Gamma density with shape `mu` and scale `b`.
pub fn gamma_density<T: Real>(w: T, mu: T, b: T) -> T {
    if w < T::zero() {
        return T::zero();
    }
    if w == T::zero() {
        return if mu < T::one() {
            T::infinity()
        } else if mu == T::one() {
            T::one() / b
        } else {
            T::zero()
        };
    }
    ((mu - T::one()) * w.ln() - w / b - crate::special::ln_gamma(mu) - mu * b.ln()).exp()
}

/// Causal Cauchy product along the first axis.
pub(crate) fn convolve_rows<T: Real>(a: &Array2<T>, d: &[T]) -> Array2<T> {
    let (k, l) = a.dim();
    Array2::from_shape_fn((k, l), |(i, j)| {
        let mut s = KahanSum::new();
        for t in 0..=i.min(d.len().saturating_sub(1)) {
            s.add(d[t] * a[[i - t, j]]);
        }
        s.value()
    })
}

pub(crate) fn convolve_cols<T: Real>(a: &Array2<T>, d: &[T]) -> Array2<T> {
    convolve_rows(&a.t().to_owned(), d).t().to_owned()
}
