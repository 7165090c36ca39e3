use critkernel::parametrix::*;
use critkernel::resolvent::*;
use critkernel::sde_sim::*;
use critkernel::Error;
use std::f64::consts::PI;
use std::sync::Arc;

fn zero() -> ScalarFn {
    Arc::new(|_| 0.0)
}

#[test]
fn event_counts_match_the_intensity() {
    let spec = LevyNoiseSpec::cauchy(0.1, 1.0);
    let rate = spec.mid_intensity() + spec.big_intensity();
    // ∫_{|z|≥ε} |z|^{-2} dz = 2/ε
    assert!((rate - 20.0).abs() < 1e-12, "{rate}");
    let horizon = 2.0;
    let n = 2000;
    let total: usize = (0..n).map(|i| sample_noise(&spec, horizon, 1, i).unwrap().events.len()).sum();
    let mean = total as f64 / n as f64;
    let expect = rate * horizon;
    assert!((mean - expect).abs() <= 3.0 * (expect / n as f64).sqrt(), "{mean} vs {expect}");

    let big: usize = (0..n)
        .map(|i| sample_noise(&spec, horizon, 1, i).unwrap().events.iter().filter(|e| e.z.abs() >= 1.0).count())
        .sum();
    let big_mean = big as f64 / n as f64;
    let e_big = 2.0 * horizon;
    assert!((big_mean - e_big).abs() <= 3.0 * (e_big / n as f64).sqrt(), "{big_mean}");
}

#[test]
fn noise_is_deterministic_and_empty_at_time_zero() {
    let spec = LevyNoiseSpec::cauchy(0.05, 1.0);
    assert!(sample_noise(&spec, 0.0, 3, 0).unwrap().events.is_empty());
    let a = sample_noise(&spec, 1.0, 3, 4).unwrap();
    let b = sample_noise(&spec, 1.0, 3, 4).unwrap();
    let c = sample_noise(&spec, 1.0, 3, 5).unwrap();
    assert_eq!(a.events.len(), b.events.len());
    assert!(a.events.iter().zip(&b.events).all(|(x, y)| x.t == y.t && x.z == y.z && x.r == y.r));
    assert!(a.events.len() != c.events.len() || a.events.iter().zip(&c.events).any(|(x, y)| x.t != y.t));
    assert!(a.events.iter().all(|e| e.z.abs() >= 0.05 && e.t <= 1.0));
    assert!(LevyNoiseSpec::cauchy(1.5, 1.0).validate().is_err());
}

#[test]
fn zero_sigma_and_constant_drift() {
    let spec = LevyNoiseSpec::cauchy(0.1, 1.0);
    let noise = sample_noise(&spec, 1.5, 9, 0).unwrap();
    let c = SdeCoeffs::constant(Arc::new(|_| 0.4), 0.0);
    let tr = simulate_path(0.25, &c, &noise, 1.0 / 64.0, true).unwrap();
    assert_eq!(tr.accepted, 0);
    assert_eq!(tr.proposed, noise.events.len());
    assert!((tr.final_state - (0.25 + 0.4 * 1.5)).abs() < 1e-12);
    assert_eq!(tr.mesh.len(), 97);

    // b ≡ 0, σ ≡ 1: the path is the sum of all marks
    let c = SdeCoeffs::constant(zero(), 1.0);
    let tr = simulate_path(0.0, &c, &noise, 0.1, false).unwrap();
    let sum: f64 = noise.events.iter().map(|e| e.z).sum();
    assert!((tr.final_state - sum).abs() < 1e-12);
    assert!(simulate_path(0.0, &c, &noise, 0.0, false).is_err());
}

#[test]
fn thinning_keeps_the_expected_fraction() {
    let spec = LevyNoiseSpec::cauchy(0.1, 1.0);
    let c = SdeCoeffs::constant(zero(), 0.5);
    let (mut acc, mut prop) = (0usize, 0usize);
    for i in 0..500 {
        let noise = sample_noise(&spec, 1.0, 2, i).unwrap();
        let tr = simulate_path(0.0, &c, &noise, 0.25, false).unwrap();
        acc += tr.accepted;
        prop += tr.proposed;
    }
    let ratio = acc as f64 / prop as f64;
    assert!((ratio - 0.5).abs() <= 0.02, "{ratio}");
}

#[test]
fn mid_band_compensator_vanishes() {
    let spec = LevyNoiseSpec::cauchy(0.05, 1.0);
    assert_eq!(spec.mid_compensator(), 0.0);
    let mut marks = Vec::new();
    for i in 0..400 {
        marks.extend(sample_noise(&spec, 1.0, 8, i).unwrap().events.iter().filter(|e| e.z.abs() < 1.0).map(|e| e.z));
    }
    let n = marks.len() as f64;
    let m = marks.iter().sum::<f64>() / n;
    let sd = (marks.iter().map(|z| (z - m).powi(2)).sum::<f64>() / n).sqrt();
    assert!(m.abs() <= 3.0 * sd / n.sqrt(), "{m}");
}

#[test]
fn density_estimate_basics() {
    // deterministic symmetric sample from normal quantiles
    let n = MIN_PATHS;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    use statrs::distribution::ContinuousCDF;
    let s: Vec<f64> = (0..n).map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
    let xs: Vec<f64> = (-40..=40).map(|k| 0.1 * k as f64).collect();
    let d = density_estimate(&s, &xs, Bandwidth::Silverman).unwrap();
    assert!((d.mass_on(-50.0, 50.0) - 1.0).abs() < 1e-12);
    for k in 0..xs.len() {
        assert!((d.values[k] - d.values[xs.len() - 1 - k]).abs() < 1e-12);
    }
    let centre = d.values[40];
    assert!((centre - 1.0 / (2.0 * PI).sqrt()).abs() < 0.01, "{centre}");
    assert!(matches!(density_estimate(&s[..100], &xs, Bandwidth::Silverman), Err(Error::TooFewPaths { .. })));
    assert!(ks_distance(&s, &|y| normal.cdf(y)) <= 1.0 / n as f64);
}

#[test]
fn kato_norms() {
    for horizon in [0.1, 0.5, 2.0] {
        let k = kato_norm(&KatoFunction::constant(1.0), horizon, &[0.0, 1.0]);
        assert!((k - 4.0 * horizon).abs() < 1e-8, "{k}");
    }
    let lp = kato_norm(&KatoFunction::lp_example(2.0), 0.5, &[-1.0, 0.0, 0.3, 1.0]);
    assert!(lp.is_finite() && lp > 0.0);
    // K(T) → 0 as T → 0
    let small = kato_norm(&KatoFunction::lp_example(2.0), 0.01, &[0.0]);
    assert!(small < lp);
}

#[test]
fn krylov_functional_matches_the_kernel_side() {
    let m = preset("cauchy-constant").unwrap();
    let table = assemble_p(&sum_series(&m, &ParametrixConfig::default()).unwrap());
    let spec = LevyNoiseSpec::for_model(&m, 0.01);
    let c = SdeCoeffs::from_model(&m, &spec);
    let ens = simulate_ensemble(0.0, &c, &spec, 1.0, 1.0 / 256.0, 10_000, 4, true).unwrap();
    let (one, se) = krylov_functional(&ens, &|_| 1.0).unwrap();
    assert!((one - 1.0).abs() < 1e-12 && se < 1e-12);

    let ball = |x: f64| if x.abs() <= 0.5 { 1.0 } else { 0.0 };
    let (mc, se) = krylov_functional(&ens, &ball).unwrap();
    let kernel = krylov_kernel_side(&table, 0.0, 1.0, &ball, &[-0.5, 0.5]).unwrap();
    assert!((mc - kernel).abs() <= 3.0 * se + 1e-3, "{mc} ± {se} vs {kernel}");

    let bare = simulate_ensemble(0.0, &c, &spec, 1.0, 0.1, 20, 4, false).unwrap();
    assert!(matches!(krylov_functional(&bare, &ball), Err(Error::Dependency { .. })));
}

#[test]
fn strong_errors_shrink_under_refinement() {
    let m = preset("holder-drift").unwrap();
    let spec = LevyNoiseSpec::for_model(&m, 1e-2);
    let c = SdeCoeffs::from_model(&m, &spec);
    let dts: Vec<f64> = (9..=12).map(|k| 0.5f64.powi(k)).collect();
    let tab = pathwise_uniqueness_experiment(&c, &spec, 0.3, 1.0, &dts, 200, 21).unwrap();
    assert!(tab.strictly_decreasing(), "{:?}", tab.errors);
    assert!(pathwise_uniqueness_experiment(&c, &spec, 0.3, 1.0, &dts[..1], 2, 21).is_err());
}

#[test]
fn coupled_run_tracks_the_mapped_path() {
    let m = preset("default-test").unwrap();
    let table = assemble_p(&sum_series(&m, &ParametrixConfig::default()).unwrap());
    let sol = solve_resolvent(&table, &ResolventConfig::default()).unwrap();
    let map = Arc::new(ZvonkinMap::new(&sol).unwrap());
    let spec = LevyNoiseSpec::for_model(&m, 0.1);
    let tc = Arc::new(transformed_coeffs(map.clone(), &m, &spec).unwrap());
    let yc = SdeCoeffs::zvonkin(tc);
    let r = zvonkin_coupled_run(&m, &map, &yc, &spec, 0.3, 1.0, 1.0 / 16.0, 2000, 17).unwrap();
    assert!(r.distance.is_finite() && r.baseline > 0.0);
    assert!(r.distance <= 3.0 * r.baseline + 3.0 * r.distance_se, "{r:?}");
}

#[test]
fn generator_matches_quadrature() {
    let m = preset("default-test").unwrap();
    let spec = LevyNoiseSpec::for_model(&m, 1e-3);
    let r = generator_check(&m, &spec, 0.3, &|x: f64| x.sin(), &|x: f64| x.cos(), 0.05, 5, 8, 20_000, 2).unwrap();
    assert!((r.estimate - r.reference).abs() <= 4.0 * r.std_err + 0.05, "{r:?}");
}
