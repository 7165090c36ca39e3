use critkernel::parametrix::{preset, ParametrixConfig};
use critkernel::verifiers::*;
use critkernel::Error;
use std::f64::consts::PI;

fn dyadic_times() -> Vec<f64> {
    (1..=6).rev().map(|k| 0.5f64.powi(k)).collect()
}

#[test]
fn regression_refuses_short_series() {
    let pts: Vec<(f64, f64)> = (0..4).map(|k| (2f64.powi(-k), 2f64.powi(k))).collect();
    assert!(matches!(exponent_regression(&pts), Err(Error::Domain(_))));
}

#[test]
fn regression_recovers_exact_power() {
    let pts: Vec<(f64, f64)> = (0..6).map(|k| (2f64.powi(-k), 3.0 * 2f64.powf(1.5 * k as f64))).collect();
    let fit = exponent_regression(&pts).unwrap();
    assert!((fit.slope + 1.5).abs() < 1e-12);
    assert!(fit.ci.0 <= fit.slope && fit.slope <= fit.ci.1);
}

#[test]
fn unknown_id_and_missing_table_are_errors() {
    let ctx = VerifyContext::new(&preset("cauchy-constant").unwrap());
    assert!(matches!(verify_bound("p9", &ctx), Err(Error::Config { .. })));
    match verify_bound("eq16", &ctx) {
        Err(Error::Dependency { module, .. }) => assert_eq!(module, "parametrix"),
        other => panic!("expected dependency error, got {other:?}"),
    }
    assert!(matches!(verify_bound("es2", &ctx), Err(Error::Dependency { module: "resolvent", .. })));
}

#[test]
fn cauchy_model_reduces_to_closed_forms() {
    let m = preset("cauchy-constant").unwrap();
    let ctx = VerifyContext::build(&m, &ParametrixConfig::default(), Stage::Zvonkin, 0.01).unwrap();

    let eq16 = verify_bound("eq16", &ctx).unwrap();
    let oracle = cauchy_eq16_constant();
    assert!((eq16.fitted - oracle).abs() <= 0.2 * oracle, "{} vs {oracle}", eq16.fitted);
    assert!(eq16.pass);

    // ∫∇p₀ dy = ∇(1) = 0
    let b00 = verify_bound("00", &ctx).unwrap();
    assert!(b00.fitted < 1e-12, "{}", b00.fitted);

    // Z(t,0)/ϱ₁⁰(t,0) = 1/π² is the smallest ratio of the Cauchy kernel
    let p0 = verify_bound("p0", &ctx).unwrap();
    assert!((p0.lower.unwrap() - 1.0 / (PI * PI)).abs() < 1e-6);
    assert!(p0.pass);

    for id in ["eq3", "eq4", "es2", "b"] {
        assert_eq!(verify_bound(id, &ctx).unwrap().fitted, 0.0, "{id}");
    }
    assert_eq!(verify_bound("upd", &ctx).unwrap().fitted, 1.0);

    let diag = scaling_exponent(&ctx, ScalingQuantity::OnDiagonal { y: 0.3 }, &dyadic_times()).unwrap();
    assert!((diag.slope + 1.0).abs() < 1e-6);
    let grad = scaling_exponent(&ctx, ScalingQuantity::GradSup { y: 0.3 }, &dyadic_times()).unwrap();
    assert!((grad.slope + 2.0).abs() < 1e-3, "{}", grad.slope);
}

#[test]
fn default_model_bounds_are_finite_and_stable() {
    let m = preset("default-test").unwrap();
    let ctx = VerifyContext::build(&m, &ParametrixConfig::default(), Stage::Zvonkin, 0.01).unwrap();
    let mut reports = Vec::new();
    for id in BOUND_IDS {
        let r = verify_bound(id, &ctx).unwrap();
        assert!(r.fitted.is_finite() && r.fitted > 0.0, "{id}: {}", r.fitted);
        assert!(r.drift.is_some(), "{id}");
        assert!(r.pass, "{id}: drift {:?} note {}", r.drift, r.note);
        reports.push(r);
    }
    let eqn = &reports[BOUND_IDS.iter().position(|&i| i == "eqn").unwrap()];
    assert!(eqn.profile.len() >= 2);
    assert!(eqn.profile.iter().all(|p| p.1 <= 1.0 + 1e-12));

    for v in [0.5 * m.beta, 0.75 * m.beta] {
        let r = holder_report(&ctx, v).unwrap();
        assert!(r.drift.unwrap() <= 0.25, "vartheta {v}");
    }
    let diag = scaling_exponent(&ctx, ScalingQuantity::OnDiagonal { y: 0.3 }, &dyadic_times()).unwrap();
    assert!(diag.within_target(), "{}", diag.slope);
    let grad = scaling_exponent(&ctx, ScalingQuantity::GradSup { y: 0.3 }, &dyadic_times()).unwrap();
    assert!(grad.within_target(), "{}", grad.slope);
    let res = scaling_exponent(&ctx, ScalingQuantity::ResolventGradient, &[1.0, 2.0, 4.0, 8.0, 16.0]).unwrap();
    assert!(res.within_target(), "{}", res.slope);

    let table = summary_table(&reports);
    for id in BOUND_IDS {
        assert!(table.lines().any(|l| l.split_whitespace().next() == Some(id)), "{id}");
    }
    let json = serde_json::to_string(&reports[0]).unwrap();
    let back: BoundReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.fitted, reports[0].fitted);
}
