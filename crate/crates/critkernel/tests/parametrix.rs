use critkernel::base_kernels::family::Profile;
use critkernel::base_kernels::{cauchy, FourierGrid, StableKernel, SymbolEvaluator};
use critkernel::linalg::Mat;
use critkernel::parametrix::check::{fixed_point_check, random_probes};
use critkernel::parametrix::ops::{q0_direct, three_p_ratio};
use critkernel::parametrix::series::{gamma_coeff, majorant, sum_series_on, tail_bound};
use critkernel::parametrix::*;
use critkernel::Error;
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

struct Built {
    state: ParametrixState,
    table: KernelTable,
}

fn default_built() -> &'static Built {
    static CELL: OnceLock<Built> = OnceLock::new();
    CELL.get_or_init(|| {
        let m = preset("default-test").unwrap();
        let lat = Arc::new(Lattice::build(&m, &ParametrixConfig::default()).unwrap());
        let state = sum_series_on(lat, 1e-3).unwrap();
        let table = assemble_p(&state);
        Built { state, table }
    })
}

fn constant_built() -> &'static Built {
    static CELL: OnceLock<Built> = OnceLock::new();
    CELL.get_or_init(|| {
        let state = sum_series(&preset("cauchy-constant").unwrap(), &ParametrixConfig::default()).unwrap();
        let table = assemble_p(&state);
        Built { state, table }
    })
}

#[test]
fn frozen_kernel_without_x_dependence_is_the_stable_kernel() {
    let mut m = preset("cauchy-constant").unwrap();
    m.k0 = Profile::new(|r: f64| 1.0 + 0.5 * (-r).exp(), 1.0);
    m.kappa1 = 1.5;
    let spec = m.frozen_spec(0.0);
    let grid = FourierGrid::for_time(0.5, 1.0, 1, 4000.0);
    let z = StableKernel::new(&SymbolEvaluator::new(&spec).unwrap(), 0.5, &grid).unwrap();
    for &(x, y) in &[(0.0, 0.0), (0.3, -0.4), (2.0, 1.0), (-3.0, 2.5)] {
        let p = frozen_kernel(0.5, x, y, &m).unwrap();
        let r = z.eval(&[x - y]).unwrap();
        assert!((p - r).abs() < 2e-6, "{x} {y}: {p} vs {r}");
    }
}

#[test]
fn constant_drift_is_a_pure_shift() {
    let mut m = preset("cauchy-constant").unwrap();
    m.b = Arc::new(|_| 0.7);
    m.b_sup = 0.7;
    let t = 0.4;
    for &(x, y) in &[(0.0, 0.0), (1.0, -0.5)] {
        let p = frozen_kernel(t, x, y, &m).unwrap();
        assert!((p - cauchy(PI * t, x - y + 0.7 * t)).abs() < 1e-15);
        assert_eq!(q0(t, x, y, &m).unwrap(), 0.0);
    }
}

#[test]
fn frozen_kernel_rejects_nonpositive_time() {
    let m = preset("default-test").unwrap();
    assert!(matches!(frozen_kernel(0.0, 0.0, 0.0, &m), Err(Error::Domain(_))));
}

#[test]
fn frozen_kernel_concentrates_mass() {
    // ∫_{|x−y|<δ} p₀(t,x,y)dx → 1 as t ↓ 0
    let m = preset("default-test").unwrap();
    let k = FrozenKernels::new(&m);
    let y = 0.3;
    let mass = |t: f64| {
        let fam = k.family_uncached(t);
        let n = 4000;
        let h = 0.4 / n as f64;
        (0..n).map(|i| h * k.eval(&fam, KernelKind::P0, y - 0.2 + (i as f64 + 0.5) * h, y)).sum::<f64>()
    };
    assert_eq!(frozen_kernel(0.01, 0.25, y, &m).unwrap(), k.eval(&k.family_uncached(0.01), KernelKind::P0, 0.25, y));
    let (a, b) = (mass(0.01), mass(0.001));
    assert!(b > a && b > 0.98, "{a} {b}");
}

#[test]
fn q0_vanishes_on_the_diagonal_and_matches_direct_quadrature() {
    let m = preset("default-test").unwrap();
    assert_eq!(q0(0.3, 0.7, 0.7, &m).unwrap(), 0.0);
    for &(t, x, y) in &[(0.5, 0.3, -0.4), (0.25, 1.2, 0.9), (1.0, -0.6, 1.5)] {
        let a = q0(t, x, y, &m).unwrap();
        let b = q0_direct(t, x, y, &m, 1e-4).unwrap();
        assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()) + 1e-3 * a.abs(), "{t} {x} {y}: {a} {b}");
    }
}

#[test]
fn invalid_beta_is_rejected() {
    let mut m = preset("default-test").unwrap();
    m.beta = 1.2;
    assert!(matches!(Lattice::build(&m, &ParametrixConfig::default()), Err(Error::InvalidSpec(_))));
}

#[test]
fn picard_step_of_zero_is_zero() {
    let b = default_built();
    let lat = &b.state.lattice;
    let zeros: Vec<Mat> = (0..lat.time.len()).map(|_| Mat::zeros(lat.space.n)).collect();
    assert!(lat.picard_step(&zeros).iter().all(|m| m.max_abs() == 0.0));
}

#[test]
fn constant_coefficients_give_p0_exactly() {
    let b = constant_built();
    assert_eq!(b.state.order, 0);
    assert!(b.state.q_tables[0].iter().all(|m| m.max_abs() == 0.0));
    let lat = &b.table.lattice;
    let m = preset("cauchy-constant").unwrap();
    for i in [0, 10, lat.time.len() - 1] {
        for (j, k) in [(100, 120), (128, 128), (3, 250)] {
            assert_eq!(b.table.node_value(i, j, k), lat.mats[i].p0.get(j, k));
        }
        let t = lat.time.nodes[i];
        let (x, y) = (0.37, -0.21);
        assert_eq!(b.table.p(t, x, y).unwrap(), frozen_kernel(t, x, y, &m).unwrap());
    }
}

#[test]
fn series_tail_is_certified() {
    let s = &default_built().state;
    assert!(s.order >= 1 && s.order <= 20);
    assert!(s.tail_bound < 1e-3 * s.leading, "tail {} leading {}", s.tail_bound, s.leading);
    let beta = s.model().beta;
    for n in 0..s.order {
        assert!(tail_bound(s.c_d, beta, n + 1) < tail_bound(s.c_d, beta, n));
    }
    // every level is dominated by its majorant with the fitted constant
    for st in &s.stats {
        assert!(st.ratio <= gamma_coeff(s.c_d, beta, st.n) * (1.0 + 1e-12), "{st:?}");
    }
    assert!(s.stats[0].ratio > 0.0 && s.stats[0].ratio < 10.0);
}

#[test]
fn fixed_point_equation_holds_at_probes() {
    let s = &default_built().state;
    let probes = random_probes(s, &[0.5, 1.0], 6, 11);
    for r in fixed_point_check(s, &probes) {
        assert!(r.rel_residual <= 2.0 * s.lattice.config.quad_tol, "{r:?}");
    }
}

#[test]
fn conservation_and_positivity() {
    let t = &default_built().table;
    let lat = &t.lattice;
    for i in (0..lat.time.len()).step_by(4) {
        for j in (64..=192).step_by(16) {
            let r = t.row_sum(i, j);
            assert!((0.99..=1.01).contains(&r), "t={} x={} sum={r}", lat.time.nodes[i], lat.space.x(j));
        }
    }
    assert!(t.min_value >= -t.tolerance);
    assert!(t.clamped_fraction < 1e-3);
}

#[test]
fn chapman_kolmogorov_at_probe_triples() {
    let t = &default_built().table;
    let n = t.times().len();
    let tol = 2.0 * t.tolerance;
    for &(a, b, x, y) in &[(n - 5, n - 5, 0.0, 0.5), (n - 5, n - 5, -1.0, 1.0), (n - 9, n - 9, 0.5, 0.0), (n - 9, n - 5, 2.0, 1.0), (n - 13, n - 13, 0.25, -0.25)] {
        let (lhs, rhs) = t.chapman_kolmogorov(a, b, x, y).unwrap();
        assert!((lhs - rhs).abs() <= tol * lhs, "{lhs} {rhs}");
    }
}

#[test]
fn pde_residual_constant_model_and_refinement() {
    let m = preset("cauchy-constant").unwrap();
    let coarse = &constant_built().table;
    let fine_state = sum_series(&m, &ParametrixConfig::default().refined()).unwrap();
    let fine = assemble_p(&fine_state);
    let rc = coarse.pde_residual(1.0, 1.0, 0.0).unwrap();
    let rf = fine.pde_residual(1.0, 1.0, 0.0).unwrap();
    assert!(rc.residual <= 5e-3 * rc.dpdt.abs(), "{rc:?}");
    assert!(rf.residual <= 0.5 * rc.residual, "{rc:?} {rf:?}");
    assert_eq!(rc.drift, 0.0);
    assert!(matches!(coarse.pde_residual(1.0, 0.5, 0.5), Err(Error::Domain(_))));
}

#[test]
fn pde_residual_default_model() {
    let t = &default_built().table;
    for &(tt, x, y) in &[(1.0, 1.0, 0.0), (0.5, 0.5, -0.5)] {
        let r = t.pde_residual(tt, x, y).unwrap();
        assert!(r.residual <= 1e-2 * r.dpdt.abs(), "{r:?}");
    }
}

#[test]
fn table_text_round_trip() {
    let t = &constant_built().table;
    let mut buf = Vec::new();
    t.write_text(&mut buf).unwrap();
    let back = assemble::read_text(std::io::Cursor::new(buf)).unwrap();
    assert_eq!(back.n, t.lattice.space.n);
    assert_eq!(back.times, t.times());
    assert_eq!(back.model_hash, t.model_hash);
    let n = back.n;
    for &(i, j, k) in &[(0, 0, 0), (5, 100, 130), (28, 256, 3)] {
        assert_eq!(back.values[(i * n + j) * n + k], t.node_value(i, j, k));
    }
}

#[test]
fn three_p_worst_ratio_is_finite() {
    let r = three_p_inequality_check(0.0, 0.0, 0.0, 0.0, 100, ThreePForm::Spatial, 3).unwrap();
    assert!(r.worst_ratio.is_finite() && r.worst_ratio > 0.0 && r.worst_ratio < 10.0, "{r:?}");
    // degenerate x = y, s = t stays under the same constant
    for &t in &[1e-3, 0.1, 1.0] {
        let d = three_p_ratio(ThreePForm::Spatial, (0.0, 0.0), (0.0, 0.0), t, t, 0.2, 0.2);
        assert!(d <= r.worst_ratio * 1.05, "{d} vs {}", r.worst_ratio);
    }
}

#[test]
fn three_p_ratio_is_scale_invariant_without_cutoffs() {
    let a = three_p_ratio(ThreePForm::Spatial, (0.0, 0.0), (0.0, 0.0), 0.1, 0.3, 0.2, -0.5);
    let b = three_p_ratio(ThreePForm::Spatial, (0.0, 0.0), (0.0, 0.0), 0.7, 2.1, 1.4, -3.5);
    assert!((a - b).abs() < 1e-6 * a, "{a} {b}");
}

#[test]
fn three_p_time_integrated_form() {
    let r = three_p_inequality_check(0.5, 0.5, 0.0, 0.0, 6, ThreePForm::TimeIntegrated, 5).unwrap();
    assert!(r.worst_ratio.is_finite() && r.worst_ratio < 10.0, "{r:?}");
    assert!(three_p_inequality_check(0.2, 0.2, -0.5, 0.0, 2, ThreePForm::TimeIntegrated, 5).is_err());
}

proptest! {
    #[test]
    fn majorant_is_positive(n in 0usize..8, beta in 0.1f64..0.99, t in 1e-3f64..1.0, x in -5.0f64..5.0) {
        prop_assert!(majorant(n, beta, t, x) > 0.0);
    }

    #[test]
    fn tail_bound_decreases_in_order(c in 0.1f64..1.5, beta in 0.5f64..0.99, n in 0usize..15) {
        prop_assert!(tail_bound(c, beta, n + 1) < tail_bound(c, beta, n));
    }
}
