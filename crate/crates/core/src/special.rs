//! Special functions evaluated in the working precision.

use crate::scalar::Real;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // lnΓ(x) = lnΓ(x + 1) − ln x keeps tiny arguments accurate.
        return ln_gamma(x + T::one()) - x.ln();
    }
    let x = x - T::one();
    let mut a = T::lit(LANCZOS[0]);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a = a + T::lit(c) / (x + T::from_count(i));
    }
    let t = x + T::lit(LANCZOS_G) + half;
    T::lit(0.5) * (T::TAU()).ln() + (x + half) * t.ln() - t + a.ln()
}

/// `ln n!`
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < 2 {
        return T::zero();
    }
    if n <= 64 {
        (2..=n).map(|k| T::from_count(k).ln()).sum()
    } else {
        ln_gamma(T::from_count(n) + T::one())
    }
}

/// `ln[Γ(n + μ) / (n! Γ(μ))]`, the log of the negative-binomial weight.
pub fn ln_rising_over_factorial<T: Real>(n: usize, mu: T) -> T {
    if n == 0 {
        return T::zero();
    }
    if n <= 64 {
        let mut acc = T::zero();
        for j in 0..n {
            let jj = T::from_count(j);
            acc = acc + ((mu + jj) / (jj + T::one())).ln();
        }
        acc
    } else {
        ln_gamma(T::from_count(n) + mu) - ln_gamma(mu) - ln_factorial::<T>(n)
    }
}

/// `ln C(n, k)`
pub fn ln_choose<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::neg_infinity();
    }
    ln_factorial::<T>(n) - ln_factorial::<T>(k) - ln_factorial::<T>(n - k)
}

/// Table of `ln k!` for `k = 0..=n`.
pub fn ln_factorial_table<T: Real>(n: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(T::zero());
    let mut acc = T::zero();
    for k in 1..=n {
        if k <= 64 {
            acc = acc + T::from_count(k).ln();
            out.push(acc);
        } else {
            out.push(ln_gamma(T::from_count(k) + T::one()));
        }
    }
    out
}

/// Regularized upper incomplete gamma `Q(n + 1, x)` for integer shape,
/// which equals the Poisson probability of at most `n` events at mean `x`.
pub fn poisson_cdf(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let mut ln_term = -x;
    let mut terms = Vec::with_capacity(n + 1);
    terms.push(ln_term);
    for k in 1..=n {
        ln_term += x.ln() - (k as f64).ln();
        terms.push(ln_term);
    }
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    (max + s.ln()).exp().min(1.0)
}

/// Poisson upper tail `P(N > n)` at mean `x`, accurate when it is small.
pub fn poisson_sf(n: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let lx = x.ln();
    let mut k = n + 1;
    let mut ln_term = -x + (k as f64) * lx - ln_factorial::<f64>(k);
    let mut total = 0.0;
    loop {
        let t = ln_term.exp();
        total += t;
        k += 1;
        ln_term += lx - (k as f64).ln();
        if (k as f64) > x && ln_term.exp() < total * 1e-17 {
            break;
        }
        if k > n + 100_000 {
            break;
        }
    }
    total.min(1.0)
}
