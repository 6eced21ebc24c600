// 3.14 is a measured mean photon number, not an approximation of pi; oracle values keep
// all the digits they were computed with.
#![allow(clippy::approx_constant, clippy::excessive_precision)]

use approx::assert_relative_eq;
use proptest::prelude::*;
use statrs::distribution::{Binomial, Discrete, NegativeBinomial, Poisson};
use twinbeam::criteria::{correlation_coefficient, noise_reduction};
use twinbeam::dist::*;
use twinbeam::{Error, ModeParams, TwbModel};

fn mp(mu: f64, b: f64) -> ModeParams {
    ModeParams::new(mu, b).unwrap()
}

fn small_model(b_s: f64, b_i: f64) -> TwbModel {
    TwbModel {
        paired: mp(2.0, 0.6),
        noise_s: mp(1.5, b_s),
        noise_i: mp(0.7, b_i),
        eta_s: 0.4,
        eta_i: 0.7,
    }
}

#[test]
fn mandel_rice_matches_high_precision_values() {
    // 40-digit evaluations of the closed form
    let cases = [
        (0, 31.0, 0.13, 2.262_394_060_792_078_9e-2),
        (5, 1.2e-3, 24.0, 1.954_227_724_260_972_7e-4),
        (3, 2.5, 0.7, 1.215_890_230_201_793_5e-1),
        (40, 31.0, 0.13, 3.406_155_710_027_383_2e-20),
        (0, 5.5e-3, 13.0, 9.855_900_167_997_423_8e-1),
    ];
    for (n, mu, b, want) in cases {
        assert_relative_eq!(
            mandel_rice_pmf(n, &mp(mu, b)).unwrap(),
            want,
            max_relative = 1e-12
        );
    }
    let ln = mandel_rice_ln_pmf(200, &mp(295.0, 3.14 / 295.0)).unwrap();
    assert_relative_eq!(ln, 3.230_387_173_310_764_9e-254_f64.ln(), max_relative = 1e-12);
}

#[test]
fn mandel_rice_matches_negative_binomial() {
    for &(mu, b) in &[(1.0, 1.0), (31.0, 0.13), (4.5, 2.0), (0.3, 7.0)] {
        let nb = NegativeBinomial::new(mu, 1.0 / (1.0 + b)).unwrap();
        for n in 0..60u64 {
            let want = nb.pmf(n);
            let got = mandel_rice_pmf(n as usize, &mp(mu, b)).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-9, epsilon = 1e-300);
        }
    }
}

#[test]
fn degenerate_and_invalid_parameters() {
    assert_eq!(mandel_rice_pmf(0, &mp(3.0, 0.0)).unwrap(), 1.0);
    assert_eq!(mandel_rice_pmf(4, &mp(3.0, 0.0)).unwrap(), 0.0);
    assert_relative_eq!(
        mandel_rice_pmf(2, &mp(1.0, 1.0)).unwrap(),
        0.125,
        max_relative = 1e-14
    );
    assert!(matches!(
        ModeParams::new(0.0, 1.0),
        Err(Error::ParameterDomain(_))
    ));
    assert!(matches!(
        ModeParams::new(1.0, -0.1),
        Err(Error::ParameterDomain(_))
    ));
    assert!(matches!(
        multithermal_pmf(1, 0.5, -1.0),
        Err(Error::ParameterDomain(_))
    ));
}

#[test]
fn cutoff_rule_normalizes() {
    for &(mu, b) in &[(31.0, 0.13), (1.2e-3, 24.0), (1.0, 5.0), (295.0, 0.0106)] {
        let p = mp(mu, b);
        let n = mandel_rice_cutoff(&p, TAIL_TOL).unwrap();
        let v = mandel_rice_vec(&p, n).unwrap();
        let t = v.total();
        assert!((1.0 - TAIL_TOL..=1.0 + 1e-14).contains(&t), "{mu} {b}: {t}");
    }
}

#[test]
fn multithermal_limits() {
    for n in 0..20 {
        let bose = 0.8f64.powi(n as i32) / 1.8f64.powi(n as i32 + 1);
        assert_relative_eq!(multithermal_pmf(n, 0.8, 1.0).unwrap(), bose, max_relative = 1e-12);
    }
    assert_eq!(multithermal_pmf(0, 0.0, 5.0).unwrap(), 1.0);
    assert_eq!(multithermal_pmf(3, 0.0, 5.0).unwrap(), 0.0);
}

#[test]
fn multithermal_fig2_moments() {
    let probs: Vec<f64> = (0..60)
        .map(|n| multithermal_pmf(n, 0.60, 78.0).unwrap())
        .collect();
    let d = Distribution1D::new(probs);
    assert_relative_eq!(d.mean(), 0.60, max_relative = 1e-9);
    assert_relative_eq!(d.variance() / d.mean(), 1.0 + 0.60 / 78.0, max_relative = 1e-9);
    for n in 0..=50 {
        let a = multithermal_pmf(n, 3.14, 295.0).unwrap();
        let b = mandel_rice_pmf(n, &mp(295.0, 3.14 / 295.0)).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-12);
    }
}

#[test]
fn bernoulli_coefficients() {
    assert_eq!(bernoulli_coefficient(0, 0, 0.3).unwrap(), 1.0);
    assert_relative_eq!(
        bernoulli_coefficient(1, 2, 0.5).unwrap(),
        0.5,
        max_relative = 1e-15
    );
    assert_eq!(bernoulli_coefficient(3, 2, 0.5).unwrap(), 0.0);
    let total: f64 = (0..=40)
        .map(|m| bernoulli_coefficient(m, 40, 0.147).unwrap())
        .sum();
    assert_relative_eq!(total, 1.0, max_relative = 1e-14);
    let bin = Binomial::new(0.147, 300).unwrap();
    for m in [0u64, 10, 44, 120, 300] {
        let got = bernoulli_coefficient(m as usize, 300, 0.147).unwrap();
        assert_relative_eq!(got, bin.pmf(m), max_relative = 1e-9, epsilon = 1e-300);
    }
}

#[test]
fn noiseless_joint_is_diagonal() {
    let m = TwbModel {
        noise_s: mp(1.0, 0.0),
        noise_i: mp(1.0, 0.0),
        ..small_model(0.0, 0.0)
    };
    for ns in 0..12 {
        for ni in 0..12 {
            let p = joint_twb_pmf(ns, ni, &m).unwrap();
            if ns == ni {
                assert_relative_eq!(p, mandel_rice_pmf(ns, &m.paired).unwrap(), max_relative = 1e-13);
            } else {
                assert_eq!(p, 0.0);
            }
        }
    }
}

#[test]
fn joint_marginal_is_component_convolution() {
    let m = small_model(0.9, 1.4);
    let p = joint_twb_distribution_with_cutoffs(&m, 61, 61).unwrap();
    let pp: Vec<f64> = (0..=60).map(|n| mandel_rice_pmf(n, &m.paired).unwrap()).collect();
    let ps: Vec<f64> = (0..=60)
        .map(|n| mandel_rice_pmf(n, &m.noise_s).unwrap())
        .collect();
    for ns in 0..=60 {
        let conv: f64 = (0..=ns).map(|k| pp[k] * ps[ns - k]).sum();
        // idler truncation at 60 leaves a negligible tail
        let marg: f64 = (0..=60).map(|ni| p.get(ns, ni)).sum();
        assert_relative_eq!(marg, conv, max_relative = 1e-8, epsilon = 1e-16);
    }
}

#[test]
fn reference_model_landmarks() {
    let m = TwbModel::reference();
    let p = joint_twb_distribution(&m, TAIL_TOL).unwrap();
    assert!(p.total() >= 1.0 - TAIL_TOL && p.total() <= 1.0 + 1e-12);
    assert!(
        (p.diagonal_weight() - 0.982).abs() < 0.002,
        "{}",
        p.diagonal_weight()
    );
    assert!((p.correlation() - 0.85).abs() < 0.02, "{}", p.correlation());
    let d = detect_transform(&p, m.eta_s, m.eta_i).unwrap();
    assert!((d.correlation() - 0.16).abs() < 0.01, "{}", d.correlation());
    let (ms, mi) = d.means();
    let (ns, ni) = p.means();
    assert_relative_eq!(ms, m.eta_s * ns, max_relative = 1e-9);
    assert_relative_eq!(mi, m.eta_i * ni, max_relative = 1e-9);
}

#[test]
fn closed_form_detected_law_matches_channel() {
    let m = TwbModel::reference();
    let p = joint_twb_distribution(&m, TAIL_TOL).unwrap();
    let d = detect_transform(&p, m.eta_s, m.eta_i).unwrap();
    let c = detected_twb_distribution(&m, 20, 20, TAIL_TOL).unwrap();
    for u in 0..20 {
        for v in 0..20 {
            // the photon-level truncation loss lands mostly in low detected bins
            assert!((c.get(u, v) - d.get(u, v)).abs() < TAIL_TOL);
        }
    }
}

#[test]
fn detect_transform_limits() {
    let p = joint_twb_distribution(&small_model(0.5, 0.8), TAIL_TOL).unwrap();
    let id = detect_transform(&p, 1.0, 1.0).unwrap();
    for ((ij, a), b) in p.probs.indexed_iter().zip(id.probs.iter()) {
        assert!((a - b).abs() < 1e-15, "{ij:?}");
    }
    assert_eq!(id.level, Level::Detected);
    let z = detect_transform(&p, 0.0, 0.0).unwrap();
    assert_relative_eq!(z.get(0, 0), p.total(), max_relative = 1e-13);
}

#[test]
fn sum_and_difference_of_pairs() {
    let mut probs = ndarray::Array2::zeros((6, 6));
    for n in 0..6 {
        probs[[n, n]] = 1.0 / 6.0;
    }
    let p = JointDistribution::new(probs, Level::Photons);
    let s = sum_marginal(&p);
    for k in (1..s.len()).step_by(2) {
        assert_eq!(s.probs[k], 0.0);
    }
    let d = difference_marginal(&p);
    assert_relative_eq!(d.at(0), 1.0, max_relative = 1e-14);
    assert_eq!(d.at(1) + d.at(-1), 0.0);
}

#[test]
fn poisson_reference_properties() {
    let z = poisson_reference(0.0, 0.0, TAIL_TOL).unwrap();
    assert_eq!(z.get(0, 0), 1.0);
    let r = poisson_reference(0.6, 0.62, TAIL_TOL).unwrap();
    assert!(correlation_coefficient(&r).unwrap().abs() < 1e-9);
    assert_relative_eq!(noise_reduction(&r).unwrap(), 1.0, max_relative = 1e-7);
    let s = sum_marginal(&r);
    let pois = Poisson::new(1.22).unwrap();
    for k in 0..10 {
        assert_relative_eq!(s.probs[k], pois.pmf(k as u64), max_relative = 1e-9);
    }
}

#[test]
fn photon_difference_narrower_than_poisson() {
    let m = TwbModel::reference();
    let p = joint_twb_distribution(&m, TAIL_TOL).unwrap();
    let (a, b) = p.means();
    let r = poisson_reference(a, b, TAIL_TOL).unwrap();
    let dp = difference_marginal(&p);
    let dr = difference_marginal(&r);
    assert!(
        dp.variance() < 0.5 * dr.variance(),
        "{} vs {}",
        dp.variance(),
        dr.variance()
    );

    let d = detect_transform(&p, m.eta_s, m.eta_i).unwrap();
    let (a, b) = d.means();
    let rd = poisson_reference(a, b, TAIL_TOL).unwrap();
    let v1 = difference_marginal(&d).variance();
    let v2 = difference_marginal(&rd).variance();
    assert!(v1 < v2 && v1 > 0.8 * v2, "{v1} vs {v2}");
}

#[test]
fn fidelity_limits() {
    let p = mandel_rice_vec(&mp(3.0, 0.5), 40).unwrap();
    assert_relative_eq!(fidelity(&p, &p), p.total(), max_relative = 1e-14);
    let a = Distribution1D::new(vec![0.5, 0.5, 0.0, 0.0]);
    let b = Distribution1D::new(vec![0.0, 0.0, 0.5, 0.5]);
    assert_eq!(fidelity(&a, &b), 0.0);
}

fn model_strategy() -> impl Strategy<Value = TwbModel> {
    (
        (0.5f64..20.0, 0.01f64..0.8),
        (0.001f64..3.0, 0.0f64..2.0),
        (0.001f64..3.0, 0.0f64..2.0),
        (0.0f64..=1.0, 0.0f64..=1.0),
    )
        .prop_map(|(p, s, i, (es, ei))| TwbModel {
            paired: mp(p.0, p.1),
            noise_s: mp(s.0, s.1),
            noise_i: mp(i.0, i.1),
            eta_s: es,
            eta_i: ei,
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn pmf_values_in_unit_interval(n in 0usize..200, mu in 1e-4f64..400.0, b in 0.0f64..30.0) {
        let v = mandel_rice_pmf(n, &mp(mu, b)).unwrap();
        prop_assert!((0.0..=1.0).contains(&v));
    }

    #[test]
    fn multithermal_equals_mandel_rice(n in 0usize..80, mean in 1e-3f64..20.0, mu in 1e-3f64..500.0) {
        let a = multithermal_pmf(n, mean, mu).unwrap();
        let b = mandel_rice_pmf(n, &mp(mu, mean / mu)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * b.max(1e-300), "{} vs {}", a, b);
    }

    #[test]
    fn joint_symmetric_under_swap(m in model_strategy(), ns in 0usize..25, ni in 0usize..25) {
        let a = joint_twb_pmf(ns, ni, &m).unwrap();
        let b = joint_twb_pmf(ni, ns, &m.swapped()).unwrap();
        prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
    }

    #[test]
    fn detection_commutes_with_marginals(m in model_strategy()) {
        let p = joint_twb_distribution(&m, TAIL_TOL).unwrap();
        let d = detect_transform(&p, m.eta_s, m.eta_i).unwrap();
        let a = signal_marginal(&d);
        let b = thin_1d(&signal_marginal(&p), m.eta_s).unwrap();
        for k in 0..a.len() {
            prop_assert!((a.probs[k] - b.probs[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn detection_composes(m in model_strategy(), e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
        let p = joint_twb_distribution(&m, TAIL_TOL).unwrap();
        let two = detect_transform(&detect_transform(&p, e1, e2).unwrap(), e2, e1).unwrap();
        let one = detect_transform(&p, e1 * e2, e2 * e1).unwrap();
        for (a, b) in two.probs.iter().zip(one.probs.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projections_conserve_probability(m in model_strategy()) {
        let p = joint_twb_distribution(&m, TAIL_TOL).unwrap();
        let t = p.total();
        prop_assert!((1.0 - TAIL_TOL..=1.0 + 1e-12).contains(&t));
        prop_assert!((sum_marginal(&p).total() - t).abs() < 1e-13);
        prop_assert!((difference_marginal(&p).total() - t).abs() < 1e-13);
        prop_assert!(p.probs.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }
}
