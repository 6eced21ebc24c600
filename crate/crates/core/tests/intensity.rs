use ndarray::Array2;
use twinbeam::dist::{joint_twb_distribution, mandel_rice_cutoff, mandel_rice_vec, Level, TAIL_TOL};
use twinbeam::intensity::*;
use twinbeam::simulator::run_experiment;
use twinbeam::{Distribution1D, Error, JointDistribution, JointHistogram, ModeParams, TwbModel};

fn mp(mu: f64, b: f64) -> ModeParams {
    ModeParams::new(mu, b).unwrap()
}

fn law(p: &ModeParams) -> Distribution1D {
    mandel_rice_vec(p, mandel_rice_cutoff(p, TAIL_TOL).unwrap()).unwrap()
}

fn product(a: &Distribution1D, b: &Distribution1D) -> JointDistribution {
    let probs = Array2::from_shape_fn((a.len(), b.len()), |(j, m)| a.probs[j] * b.probs[m]);
    JointDistribution::new(probs, Level::Photons)
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn thermal_coefficients_match_closed_form() {
    for b in [0.3, 1.0, 2.5] {
        let p = mandel_rice_vec(&mp(1.0, b), 400).unwrap();
        let s = laguerre_series_coeffs_1d(&p, 30, 1e-6).unwrap();
        for (k, &a) in s.coeffs.iter().enumerate() {
            let want = (1.0 + b).powi(-(k as i32 + 1));
            assert!((a - want).abs() < 1e-10, "b={b} k={k}: {a} vs {want}");
        }
    }
}

#[test]
fn multithermal_coefficients_match_generating_function() {
    let m = mp(4.0, 0.7);
    let s = laguerre_series_coeffs_1d(&law(&m), 25, 1e-6).unwrap();
    let g = gamma_density_coeffs(4.0, 0.7, 25);
    assert!(sup_diff(&s.coeffs, &g) < 1e-10);
}

#[test]
fn vacuum_is_singular() {
    let vac = Distribution1D::new(vec![1.0]);
    let s = laguerre_series_coeffs_1d(&vac, 10, 1e-6).unwrap();
    assert!(s.coeffs.iter().all(|&a| a == 1.0));
    let axis = uniform_axis(5.0, 11).unwrap();
    for opts in [SeriesOptions::default(), SeriesOptions::fixed(10)] {
        assert!(matches!(
            invert_mandel_1d(&vac, &opts, &axis),
            Err(Error::SingularResult { .. })
        ));
    }
    let mut h = JointHistogram::new();
    h.add_count(0, 0, 5000);
    let r = detected_intensity_quasi(&h, &SeriesOptions::fixed(6), &GridSpec::default());
    assert!(matches!(r, Err(Error::SingularResult { .. })));
}

#[test]
fn cancellation_is_reported() {
    let p = law(&mp(1.0, 3.0));
    let r = laguerre_series_coeffs_1d(&p, p.len() - 1, 1e-6);
    assert!(matches!(r, Err(Error::Precision { .. })));
}

#[test]
fn damping_suppresses_rounding_error() {
    let p = law(&mp(1.0, 3.0));
    let k = p.len() - 1;
    let axis = uniform_axis(20.0, 101).unwrap();
    let plain = SeriesOptions::fixed(k);
    assert!(matches!(
        invert_mandel_1d(&p, &plain, &axis),
        Err(Error::Precision { .. })
    ));
    let damped = plain.with_damping(Damping::Geometric(0.5));
    assert!(invert_mandel_1d(&p, &damped, &axis).is_ok());
    let joint = product(&p, &p);
    let grid = GridSpec::new(21, 20.0);
    assert!(matches!(
        invert_mandel_2d(&joint, &plain, &grid),
        Err(Error::Precision { .. })
    ));
    let g = invert_mandel_2d(&joint, &damped, &grid).unwrap();
    assert_eq!((g.order_s, g.order_i), (k, k));
    let auto = invert_mandel_2d(&joint, &plain.with_damping(Damping::Auto), &grid).unwrap();
    assert!(auto.damping < 1.0 && auto.flags.auto_damping);
}

/// The quadrature integrand `e^(−W) W^n L_K(W)` cancels over many orders of magnitude for
/// large `K`, so the oracle is applied to laws of modest support.
#[test]
fn forward_roundtrip_of_multithermal_series() {
    let axis = uniform_axis(150.0, 12001).unwrap();
    for m in [mp(78.0, 0.6 / 78.0), mp(112.0, 1.42 / 112.0), mp(1.0, 0.3)] {
        let p = law(&m);
        let prof = invert_mandel_1d(&p, &SeriesOptions::default(), &axis).unwrap();
        let k = prof.order;
        let back = forward_mandel_check_1d(&prof, k).unwrap();
        let err = sup_diff(&back.probs, &p.probs[..=k]);
        assert!(err < 1e-6, "{m:?}: order {k}, max bin error {err:e}");
    }
}

#[test]
fn forward_transform_of_gamma_density_is_negative_binomial() {
    let axis = uniform_axis(120.0, 4001).unwrap();
    let values = axis.iter().map(|&w| gamma_density(w, 3.0, 2.0)).collect();
    let prof = IntensityProfile {
        axis,
        values,
        order: 0,
        damping: 1.0,
    };
    let back = forward_mandel_check_1d(&prof, 30).unwrap();
    let want = mandel_rice_vec(&mp(3.0, 2.0), 30).unwrap();
    assert!(sup_diff(&back.probs, &want.probs) < 1e-6);
}

#[test]
fn forward_check_needs_coverage() {
    let axis = uniform_axis(5.0, 51).unwrap();
    let prof = IntensityProfile {
        values: vec![0.0; axis.len()],
        axis,
        order: 0,
        damping: 1.0,
    };
    assert!(matches!(
        forward_mandel_check_1d(&prof, 20),
        Err(Error::Coverage(_))
    ));
}

#[test]
fn thermal_series_approaches_exponential() {
    let b = 0.8;
    let p = mandel_rice_vec(&mp(1.0, b), 400).unwrap();
    let axis = uniform_axis(5.0 * b, 101).unwrap();
    let mut last = f64::INFINITY;
    for k in [10, 20, 40] {
        let prof = invert_mandel_1d(&p, &SeriesOptions::fixed(k), &axis).unwrap();
        let exact: Vec<f64> = axis.iter().map(|&w| (-w / b).exp() / b).collect();
        let err = sup_diff(&prof.values, &exact);
        assert!(err < last);
        last = err;
    }
    assert!(last < 1e-6, "{last}");
}

/// Beyond `K ≈ 50` the differences reach the rounding floor of the coefficients.
#[test]
fn series_order_stability_beyond_twenty() {
    let b = 0.5;
    let p = mandel_rice_vec(&mp(1.0, b), 400).unwrap();
    let axis = uniform_axis(5.0 * b, 201).unwrap();
    let eval = |k| {
        invert_mandel_1d(&p, &SeriesOptions::fixed(k), &axis)
            .unwrap()
            .values
    };
    let dist: Vec<f64> = (20..=45).map(|k| sup_diff(&eval(k), &eval(k + 5))).collect();
    for w in dist.windows(2) {
        assert!(w[1] < w[0], "{dist:?}");
    }
}

#[test]
fn separable_inputs_give_separable_grids() {
    let (a, b) = (law(&mp(2.0, 0.5)), law(&mp(1.0, 1.0)));
    let grid = GridSpec {
        points: 41,
        w_max: Some((9.0, 7.0)),
    };
    let opts = SeriesOptions {
        order: SeriesOrder::PerAxis(16, 20),
        ..SeriesOptions::default()
    };
    let g = invert_mandel_2d(&product(&a, &b), &opts, &grid).unwrap();
    assert_eq!((g.order_s, g.order_i), (16, 20));
    let pa = invert_mandel_1d(&a, &SeriesOptions::fixed(16), &uniform_axis(9.0, 41).unwrap()).unwrap();
    let pb = invert_mandel_1d(&b, &SeriesOptions::fixed(20), &uniform_axis(7.0, 41).unwrap()).unwrap();
    for ((p, q), &v) in g.values.indexed_iter() {
        assert!(
            (v - pa.values[p] * pb.values[q]).abs() < 1e-10,
            "({p}, {q}): {v} vs {}",
            pa.values[p] * pb.values[q]
        );
    }
}

/// Direct inversion of a product law: truncation error falls like `(1 + b)^(−K)` while
/// rounding error grows like `(1 + b/(1 + b))^(2K)`, so on the default grid both stay
/// below 1e-6 only near `b = 1` and modest orders. The convolution path covers broader
/// classical inputs.
#[test]
fn classical_joints_are_nonnegative() {
    let cases = [
        (mp(1.0, 1.0), mp(1.0, 1.0)),
        (mp(1.0, 1.0), mp(1.0, 0.8)),
        (mp(1.0, 1.2), mp(1.0, 0.9)),
    ];
    for (a, b) in cases {
        let pa = mandel_rice_vec(&a, 200).unwrap();
        let pb = mandel_rice_vec(&b, 200).unwrap();
        for k in [20, 22, 24] {
            let g =
                invert_mandel_2d(&product(&pa, &pb), &SeriesOptions::fixed(k), &GridSpec::default()).unwrap();
            let (min, at) = g.min();
            assert!(min >= -1e-6, "{a:?} {b:?} K={k}: {min:e} at {at:?}");
            assert!(!g.flags.damped);
        }
    }
}

#[test]
fn convolution_matches_direct_inversion() {
    let m = TwbModel::reference();
    let opts = SeriesOptions::fixed(40).with_damping(Damping::Geometric(0.4));
    let grid = GridSpec::new(201, 25.0);
    let direct = invert_mandel_2d(&joint_twb_distribution(&m, TAIL_TOL).unwrap(), &opts, &grid).unwrap();
    let conv = model_quasi_convolution(&m, &opts, &grid, TAIL_TOL).unwrap();
    let diff = sup_diff(direct.values.as_slice().unwrap(), conv.values.as_slice().unwrap());
    assert!(diff < 1e-3, "{diff:e}");
    assert!(conv.min().0 < 0.0);
}

#[test]
fn convolution_without_noise_is_the_paired_part() {
    let paired = mp(31.0, 0.13);
    let m = TwbModel {
        paired,
        noise_s: mp(1.0, 0.0),
        noise_i: mp(1.0, 0.0),
        eta_s: 0.15,
        eta_i: 0.15,
    };
    let d = law(&paired);
    let mut probs = Array2::zeros((d.len(), d.len()));
    for (n, &v) in d.probs.iter().enumerate() {
        probs[[n, n]] = v;
    }
    let opts = SeriesOptions::fixed(30).with_damping(Damping::Geometric(0.5));
    let grid = GridSpec::new(51, 12.0);
    let direct = invert_mandel_2d(&JointDistribution::new(probs, Level::Photons), &opts, &grid).unwrap();
    let conv = model_quasi_convolution(&m, &opts, &grid, TAIL_TOL).unwrap();
    let diff = sup_diff(direct.values.as_slice().unwrap(), conv.values.as_slice().unwrap());
    assert!(diff < 1e-10, "{diff:e}");
}

#[test]
fn convolution_without_pairing_is_a_gamma_product() {
    let m = TwbModel {
        paired: mp(1.0, 0.0),
        noise_s: mp(2.0, 0.8),
        noise_i: mp(3.0, 0.5),
        eta_s: 0.3,
        eta_i: 0.3,
    };
    let g =
        model_quasi_convolution(&m, &SeriesOptions::fixed(70), &GridSpec::new(61, 10.0), TAIL_TOL).unwrap();
    assert!(g.min().0 >= -1e-6, "{:?}", g.min());
    for ((p, q), &v) in g.values.indexed_iter() {
        let want = gamma_density(g.axis_s[p], 2.0, 0.8) * gamma_density(g.axis_i[q], 3.0, 0.5);
        assert!((v - want).abs() < 1e-8, "({p}, {q}): {v} vs {want}");
    }
}

fn gamma_grid() -> IntensityGrid<f64> {
    let axis_s = uniform_axis(10.0, 41).unwrap();
    let axis_i = uniform_axis(8.0, 33).unwrap();
    let values = Array2::from_shape_fn((41, 33), |(p, q)| {
        gamma_density(axis_s[p], 1.0, 2.0) * gamma_density(axis_i[q], 1.0, 1.5)
    });
    IntensityGrid {
        axis_s,
        axis_i,
        values,
        order_s: 0,
        order_i: 0,
        damping: 1.0,
        field: FieldKind::Photons,
        flags: GridFlags {
            damped: false,
            auto_damping: false,
        },
    }
}

#[test]
fn positive_grid_has_no_negativity() {
    let r = negativity_report(&gamma_grid(), 1e-9);
    assert!(r.min_value >= 0.0);
    assert_eq!(r.negative_fraction, 0.0);
    assert!(r.zero_contours.is_empty());
    assert_eq!(r.max_location, (0.0, 0.0));
}

#[test]
fn sign_flip_mirrors_the_report() {
    let mut g = gamma_grid();
    g.values.mapv_inplace(|v| v - 0.05);
    let a = negativity_report(&g, 1e-9);
    let b = negativity_report(&g.negated(), 1e-9);
    assert_eq!(a.min_value, -b.max_value);
    assert_eq!(a.max_value, -b.min_value);
    assert_eq!(a.min_location, b.max_location);
    assert_eq!(a.max_location, b.min_location);
    assert!(!a.zero_contours.is_empty());
    assert!(a.negative_fraction > 0.0 && b.negative_fraction > 0.0);
    assert!((a.negative_fraction + b.negative_fraction - 1.0).abs() < 1e-12);
}

#[test]
fn strip_orientation() {
    let mut g = gamma_grid();
    let (xs, ys) = (g.axis_s.clone(), g.axis_i.clone());
    g.values = Array2::from_shape_fn(g.values.dim(), |(p, q)| (2.0 * (xs[p] - ys[q])).sin() + 0.1);
    let along = negativity_report(&g, 1e-9).strips;
    assert_eq!(along.along_diagonal, 0);
    assert!(along.across_diagonal > 0);
    assert_eq!(along.ratio, Some(0.0));
    g.values = Array2::from_shape_fn(g.values.dim(), |(p, q)| (2.0 * (xs[p] + ys[q])).sin() + 0.1);
    let across = negativity_report(&g, 1e-9).strips;
    assert!(across.along_diagonal > 0);
    assert_eq!(across.ratio, None);
}

#[test]
fn ideal_pair_source_is_strongly_negative() {
    let m = TwbModel {
        paired: mp(5.0, 0.4),
        noise_s: mp(1.0, 0.0),
        noise_i: mp(1.0, 0.0),
        eta_s: 1.0,
        eta_i: 1.0,
    };
    let h = run_experiment(&m, 200_000, 71).unwrap();
    let opts = SeriesOptions {
        order: SeriesOrder::NoiseLimited { max_std_error: 0.025 },
        ..SeriesOptions::default()
    }
    .with_damping(Damping::Geometric(0.5));
    let g = detected_intensity_quasi(&h, &opts, &GridSpec::new(101, 8.0)).unwrap();
    assert_eq!(g.field, FieldKind::DetectedPhotons);
    let r = negativity_report(&g, 1e-3 * g.max().0);
    assert!(
        r.min_value < -0.05 * r.max_value,
        "{} vs {}",
        r.min_value,
        r.max_value
    );
    assert!(!r.zero_contours.is_empty());
    let rp = r.strips.ratio.unwrap();
    assert!(rp < 1.0, "{:?}", r.strips);
}

/// Standard errors of the boundary coefficients computed shot by shot.
fn brute_force_order(h: &JointHistogram, max_se: f64, q: f64) -> usize {
    let recs = h.records();
    let n = recs.len() as f64;
    let binom = |k: u64, j: u64| -> f64 {
        if j > k {
            0.0
        } else {
            (0..j).fold(1.0, |c, t| c * (k - t) as f64 / (t + 1) as f64)
        }
    };
    let sign = |j: u64| if j.is_multiple_of(2) { 1.0 } else { -1.0 };
    let (rows, cols) = h.dim();
    let mut best = 0;
    for k in 1..rows.max(cols) as u64 {
        let mut worst = 0.0f64;
        for (x, y) in (0..=k).flat_map(|x| (0..=k).map(move |y| (x, y))) {
            if x != k && y != k {
                continue;
            }
            let vals: Vec<f64> = recs
                .iter()
                .map(|r| sign(r.m_s) * binom(x, r.m_s) * sign(r.m_i) * binom(y, r.m_i))
                .collect();
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| v * v).sum::<f64>() / n - mean * mean;
            worst = worst.max((var.max(0.0) / n).sqrt() * q.powi((x + y) as i32));
        }
        if worst > max_se {
            break;
        }
        best = k as usize;
    }
    best
}

#[test]
fn noise_limited_order_matches_shot_by_shot_errors() {
    let h = run_experiment(&TwbModel::reference(), 20_000, 81).unwrap();
    let mut prev = 0;
    for se in [0.01, 0.025, 0.05, 0.2] {
        let k = noise_limited_order(&h, se, 1.0).unwrap();
        assert_eq!(k, brute_force_order(&h, se, 1.0), "se {se}");
        assert!(k >= prev);
        prev = k;
    }
    let q = matched_damping(0.4, 0.15);
    assert!((q - 0.4 / 0.49).abs() < 1e-15);
    let damped = noise_limited_order(&h, 0.025, q).unwrap();
    assert_eq!(damped, brute_force_order(&h, 0.025, q));
    assert!(damped >= noise_limited_order(&h, 0.025, 1.0).unwrap());
    assert!(noise_limited_order(&h, 0.025, 0.0).is_err());
    assert!(noise_limited_order(&h, 0.025, 1.5).is_err());
}

#[test]
fn matched_damping_limits() {
    assert_eq!(matched_damping(1.0, 0.3), 1.0);
    assert!((matched_damping(0.4, 1.0) - 0.4).abs() < 1e-15);
    assert!(matched_damping(0.4, 0.15) > 0.4);
}

#[test]
fn single_precision_kernels() {
    let b = 1.0f32;
    let p: twinbeam::Distribution1DF32 =
        mandel_rice_vec(&twinbeam::ModeParamsF32::new(1.0, b).unwrap(), 120).unwrap();
    let s = laguerre_series_coeffs_1d(&p, 12, 1e-3).unwrap();
    for (k, &a) in s.coeffs.iter().enumerate() {
        assert!((a - 2f32.powi(-(k as i32 + 1))).abs() < 1e-5, "{k}");
    }
    let axis32 = uniform_axis::<f32>(5.0, 51).unwrap();
    let axis64 = uniform_axis::<f64>(5.0, 51).unwrap();
    let p64 = mandel_rice_vec(&mp(1.0, 1.0), 120).unwrap();
    let opts = SeriesOptions {
        cancellation_tol: 1e-3,
        ..SeriesOptions::fixed(12)
    };
    let a = invert_mandel_1d(&p, &opts, &axis32).unwrap();
    let c = invert_mandel_1d(&p64, &opts, &axis64).unwrap();
    for (x, y) in a.values.iter().zip(&c.values) {
        assert!((*x as f64 - y).abs() < 1e-4);
    }
}

#[test]
fn invalid_grids_are_rejected() {
    assert!(uniform_axis::<f64>(5.0, 1).is_err());
    assert!(uniform_axis::<f64>(-1.0, 10).is_err());
    let p = law(&mp(2.0, 0.8));
    let opts = SeriesOptions::default().with_damping(Damping::Geometric(1.5));
    assert!(invert_mandel_1d(&p, &opts, &uniform_axis(5.0, 11).unwrap()).is_err());
    let noise = SeriesOptions {
        order: SeriesOrder::NoiseLimited { max_std_error: 0.1 },
        ..SeriesOptions::default()
    };
    assert!(matches!(
        invert_mandel_2d(&product(&p, &p), &noise, &GridSpec::default()),
        Err(Error::Config(_))
    ));
}
