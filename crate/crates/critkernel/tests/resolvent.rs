use critkernel::parametrix::*;
use critkernel::resolvent::*;
use critkernel::sde_sim::LevyNoiseSpec;
use critkernel::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::{Arc, OnceLock};

struct Built {
    model: ModelSpec,
    table: KernelTable,
    sol: ResolventSolution,
    map: Arc<ZvonkinMap>,
}

fn default_built() -> &'static Built {
    static CELL: OnceLock<Built> = OnceLock::new();
    CELL.get_or_init(|| {
        let model = preset("default-test").unwrap();
        let state = sum_series(&model, &ParametrixConfig::default()).unwrap();
        let table = assemble_p(&state);
        let sol = solve_resolvent(&table, &ResolventConfig::default()).unwrap();
        let map = Arc::new(ZvonkinMap::new(&sol).unwrap());
        Built { model, table, sol, map }
    })
}

fn constant_drift_table(c: f64) -> KernelTable {
    let mut m = preset("cauchy-constant").unwrap();
    m.b = Arc::new(move |_| c);
    m.b_sup = c.abs();
    assemble_p(&sum_series(&m, &ParametrixConfig::default()).unwrap())
}

#[test]
fn zero_drift_gives_zero_solution() {
    let table = assemble_p(&sum_series(&preset("cauchy-constant").unwrap(), &ParametrixConfig::default()).unwrap());
    let sol = solve_resolvent(&table, &ResolventConfig::default()).unwrap();
    assert_eq!(sol.u_sup, 0.0);
    assert_eq!(sol.grad_sup, 0.0);
    assert_eq!(sol.doublings, 0);
}

#[test]
fn constant_drift_gives_truncated_laplace_transform() {
    let c = 0.3;
    let table = constant_drift_table(c);
    let solver = ResolventSolver::new(&table, &ResolventConfig::default()).unwrap();
    for lambda in [4.0, 8.0, 16.0] {
        let sol = solver.solve_at(lambda);
        // ∫₀^1 e^{−λt} c dt
        let exact = c * (1.0 - (-lambda).exp()) / lambda;
        for x in [-3.0, -0.4, 0.0, 1.7] {
            let u = sol.u.eval(x);
            assert!((u - exact).abs() < 1e-6 * exact.max(1.0), "lambda {lambda}, x {x}: {u} vs {exact}");
        }
        assert!(sol.grad_sup < 1e-8, "{}", sol.grad_sup);
    }
}

#[test]
fn lambda_too_small_is_reported() {
    let b = default_built();
    let cfg = ResolventConfig { lambda: Some(0.1), ..Default::default() };
    assert!(matches!(solve_resolvent(&b.table, &cfg), Err(Error::LambdaTooSmall { .. })));
    let cfg = ResolventConfig { lambda: Some(-1.0), ..Default::default() };
    assert!(matches!(solve_resolvent(&b.table, &cfg), Err(Error::Config { .. })));
}

#[test]
fn selected_lambda_satisfies_the_map_condition() {
    let b = default_built();
    assert!(b.sol.es2() <= 0.5, "{}", b.sol.es2());
    assert!(b.sol.tail_budget <= 1e-3);
}

#[test]
fn pide_residual_is_small() {
    let b = default_built();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let x: f64 = rng.random_range(-4.0..4.0);
        let r = pide_residual(&b.sol, &b.model, x).unwrap();
        assert!(r.residual <= 0.05 * b.model.b_sup, "x {x}: {r:?}");
    }
}

#[test]
fn zvonkin_map_is_bi_lipschitz() {
    let b = default_built();
    let p = b.map.probe(100, 3, 6.0).unwrap();
    assert!(p.round_trip <= 1e-9, "{}", p.round_trip);
    assert!(p.lip_min >= 0.5 && p.lip_max <= 1.5, "{p:?}");
}

#[test]
fn identity_map() {
    let id = ZvonkinMap::identity();
    for x in [-5.0, 0.0, 0.25, 9.0] {
        assert_eq!(id.forward(x), x);
        assert_eq!(id.inverse(x).unwrap(), x);
    }
    let tc = transformed_coeffs(Arc::new(id), &preset("cauchy-constant").unwrap(), &LevyNoiseSpec::cauchy(0.1, 1.0)).unwrap();
    for (y, z) in [(0.0, 0.5), (1.3, -2.0), (-0.7, 0.01)] {
        assert!((tc.g_tilde(y, z).unwrap() - z).abs() < 1e-15);
    }
}

#[test]
fn semigroup_is_a_contraction() {
    let b = default_built();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (a1, a2, w1, w2): (f64, f64, f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.5..4.0), rng.random_range(0.5..4.0));
        let f = move |y: f64| a1 * (w1 * y).sin() + a2 * (w2 * y).cos();
        let sup = a1.abs() + a2.abs();
        let t = rng.random_range(0.02..0.9);
        let xs: Vec<f64> = (-8..=8).map(|k| 0.5 * k as f64).collect();
        for v in semigroup_apply(&b.table, t, &f, &xs).unwrap() {
            assert!(v.abs() <= sup * (1.0 + 1e-3), "{v} vs {sup}");
        }
    }
}

#[test]
fn gradient_decays_with_lambda() {
    let b = default_built();
    let solver = ResolventSolver::new(&b.table, &ResolventConfig::default()).unwrap();
    let (pts, slope) = gradient_trend(&solver, &[6.0, 12.0, 24.0, 48.0]);
    assert!(pts.windows(2).all(|w| w[1].1 < w[0].1), "{pts:?}");
    assert!(slope < -0.5 && slope > -1.2, "{slope}");
}

#[test]
fn semigroup_gradient_of_a_step_blows_up_like_one_over_t() {
    let b = default_built();
    let ts: Vec<f64> = (1..=5).rev().map(|k| 0.5f64.powi(k)).collect();
    let (_, slope, _) = semigroup_gradient_scaling(&b.table, 0.3, &ts).unwrap();
    assert!((slope + 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn transformed_coefficients_are_controlled() {
    let b = default_built();
    let tc = transformed_coeffs(b.map.clone(), &b.model, &LevyNoiseSpec::for_model(&b.model, 0.01)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let y: f64 = rng.random_range(-4.0..4.0);
        let z: f64 = rng.random_range(-5.0..5.0);
        assert!(tc.g_tilde(y, z).unwrap().abs() <= 1.5 * z.abs() + 1e-12);
    }
    let h = |_: f64| 0.0;
    let (c1a, c2a) = tc.lipschitz_fits(&h, 0.45, 200, 1).unwrap();
    let (c1b, c2b) = tc.lipschitz_fits(&h, 0.45, 400, 1).unwrap();
    assert!(c1a.is_finite() && c1b.is_finite());
    assert!((c2b - c2a).abs() <= 0.25 * c2a, "{c2a} {c2b}");
}

#[test]
fn map_text_round_trip() {
    let b = default_built();
    let mut buf = Vec::new();
    b.map.write_text(&mut buf).unwrap();
    let back = ZvonkinMap::read_text(&buf[..]).unwrap();
    assert_eq!(back.lambda, b.map.lambda);
    assert_eq!(back.model_hash, b.map.model_hash);
    for x in [-2.0, 0.1, 3.3, 11.0] {
        assert_eq!(back.u(x), b.map.u(x));
        assert_eq!(back.grad.eval(x), b.map.grad.eval(x));
    }
    assert!(ZvonkinMap::read_text(&b"# lambda 1\n0 0\n"[..]).is_err());
}
