use critkernel::base_kernels::*;
use critkernel::quad::{adaptive_semi_infinite, linear_fit};
use proptest::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

fn unit() -> IsotropicKernelSpec {
    IsotropicKernelSpec::constant(1, 1.0)
}

#[test]
fn poisson_kernel_values() {
    assert!((poisson_kernel(1.0, &[0.0], 1).unwrap() - 1.0 / PI).abs() < 1e-15);
    assert_eq!(poisson_kernel(0.7, &[1.3], 1).unwrap(), poisson_kernel(0.7, &[-1.3], 1).unwrap());
    let mass = 2.0 * adaptive_semi_infinite(&|x| poisson_kernel(0.5, &[x], 1).unwrap(), 0.0, 1e-12);
    assert!((mass - 1.0).abs() < 1e-8, "{mass}");
    assert!(poisson_kernel(0.0, &[0.0], 1).is_err());
    // d = 2: ρ(1,0) = Γ(3/2)/π^{3/2} = 1/(2π)
    assert!((poisson_kernel(1.0, &[0.0, 0.0], 2).unwrap() - 0.5 / PI).abs() < 1e-14);
}

#[test]
fn symbol_oracles() {
    let s = unit();
    assert_eq!(levy_symbol(&[0.0], &s).unwrap(), 0.0);
    assert!((levy_symbol(&[1.0], &s).unwrap() - PI).abs() < 1e-6);
    let a = levy_symbol(&[0.8], &s).unwrap();
    let b = levy_symbol(&[1.6], &s).unwrap();
    assert!((b - 2.0 * a).abs() < 1e-8);
}

#[test]
fn symbol_rejects_asymmetric_spec() {
    let spec = IsotropicKernelSpec::new(1, Arc::new(|z: &[f64]| 1.0 + 0.5 * (z[0] > 0.0) as u8 as f64), 1.0, 1.5);
    assert!(levy_symbol(&[1.0], &spec).is_err());
}

#[test]
fn stable_kernel_matches_cauchy_at_origin() {
    let g = FourierGrid::for_time(1.0, 1.0, 1, 400.0);
    let z = stable_like_kernel(1.0, &[0.0], &unit(), &g).unwrap();
    assert!((z - 1.0 / (PI * PI)).abs() < 1e-4, "{z}");
    let a = stable_like_kernel(1.0, &[0.9], &unit(), &g).unwrap();
    let b = stable_like_kernel(1.0, &[-0.9], &unit(), &g).unwrap();
    assert!((a - b).abs() < 1e-15);
}

#[test]
fn stable_kernel_normalization() {
    let t = 0.25;
    let g = FourierGrid::for_time(t, 1.0, 1, 4000.0);
    let k = StableKernel::new(&SymbolEvaluator::new(&unit()).unwrap(), t, &g).unwrap();
    let (h, r) = (0.01, 20.0);
    let n = (r / h) as i64;
    let mut s = 0.0;
    for i in -n..=n {
        let w = if i.abs() == n { 0.5 } else { 1.0 };
        s += w * h * k.eval(&[i as f64 * h]).unwrap();
    }
    // Cauchy tail beyond ±R of scale πt
    s += 1.0 - 2.0 / PI * (r / (PI * t)).atan();
    assert!((s - 1.0).abs() < 1e-4, "{s}");
}

#[test]
fn coarse_grid_is_refused() {
    let g = FourierGrid::new(2.0, 64).unwrap();
    assert!(stable_like_kernel(0.05, &[0.0], &unit(), &g).is_err());
}

#[test]
fn convolution_identity() {
    let r1 = convolution_identity_check(1.0, &unit(), 1.0).unwrap();
    assert!(r1 <= 1e-3, "{r1}");
    let r_half = convolution_identity_check(0.5, &unit(), 1.0).unwrap();
    assert!(r_half <= 1e-3, "{r_half}");
    // κ₀ → 0: ρ collapses to a delta
    let r0 = convolution_identity_check(1.0, &unit(), 1e-6).unwrap();
    assert!(r0 <= 1e-4, "{r0}");
}

#[test]
fn second_difference_oracles() {
    let aff = |x: &[f64]| 3.0 * x[0] - 1.0;
    assert!(second_difference(&aff, &[0.4], &[0.3]).abs() < 1e-14);
    let sq = |x: &[f64]| x[0] * x[0];
    assert!((second_difference(&sq, &[1.7], &[0.25]) - 2.0 * 0.0625).abs() < 1e-14);
    let g = FourierGrid::for_time(1.0, 1.0, 1, 400.0);
    let k = StableKernel::new(&SymbolEvaluator::new(&unit()).unwrap(), 1.0, &g).unwrap();
    let z = |x: &[f64]| k.eval(x).unwrap();
    assert!(second_difference(&z, &[0.0], &[0.1]) < 0.0);
}

#[test]
fn apply_nonlocal_oracles() {
    let q = NonlocalQuad::default();
    let one = |_: &[f64]| 1.0;
    let lin = |x: &[f64]| 2.0 * x[0] + 5.0;
    assert!(apply_nonlocal(&lin, &[0.3], &one, &q).unwrap().abs() < 1e-10);
    assert_eq!(apply_nonlocal(&|_: &[f64]| 4.0, &[0.3], &one, &q).unwrap(), 0.0);
    let c = apply_nonlocal(&|x: &[f64]| x[0].cos(), &[0.0], &one, &q).unwrap();
    assert!((c + PI).abs() < 1e-4, "{c}");
}

#[test]
fn apply_nonlocal_d2_cosine() {
    // ψ(ξ) = 2π|ξ| in d = 2 for κ̄ ≡ 1
    let q = NonlocalQuad { tol: 1e-3, ..Default::default() };
    let f = |x: &[f64]| (0.6 * x[0] + 0.8 * x[1]).cos();
    let c = apply_nonlocal(&f, &[0.0, 0.0], &|_: &[f64]| 1.0, &q).unwrap();
    assert!((c + 2.0 * PI).abs() < 1e-3, "{c}");
}

#[test]
fn chapman_kolmogorov_constant_kernel() {
    let sym = SymbolEvaluator::new(&unit()).unwrap();
    let g = FourierGrid::for_time(0.25, 1.0, 1, 400.0);
    let k25 = StableKernel::new(&sym, 0.25, &g).unwrap();
    let k50 = StableKernel::new(&sym, 0.5, &g).unwrap();
    let k75 = StableKernel::new(&sym, 0.75, &g).unwrap();
    let rule = critkernel::quad::Rule::graded_both(-1.0, 1.0, 10, 16);
    // the t = 0.25 factor is checked against Cauchy(π/4) first, then used as the weight
    let c = 0.25 * PI / (PI * (0.0625 * PI * PI + 0.09));
    assert!((k25.eval(&[0.3]).unwrap() - c).abs() < 1e-5, "{} vs {c}", k25.eval(&[0.3]).unwrap());
    for &x in &[0.0, 0.7, 2.0] {
        // y = x − s tan(πu/2) turns the Cauchy weight into ½du
        let s = 0.25 * PI;
        let v = rule.integrate(|u| 0.5 * k50.eval(&[x - s * (0.5 * PI * u).tan()]).unwrap());
        let e = k75.eval(&[x]).unwrap();
        assert!((v - e).abs() < 1e-4, "x={x}: {v} vs {e}");
    }
}

#[test]
fn on_diagonal_scaling_slope() {
    let k = Arc::new(|z: &[f64]| 1.0 + 0.5 * (-z[0].abs()).exp());
    let spec = IsotropicKernelSpec::new(1, k, 1.0, 1.5);
    let sym = SymbolEvaluator::new(&spec).unwrap();
    let g = FourierGrid::for_time(1.0 / 64.0, 1.0, 1, 400.0);
    let (mut lt, mut lz) = (vec![], vec![]);
    for i in 1..=6 {
        let t = 0.5f64.powi(i);
        let z = StableKernel::new(&sym, t, &g).unwrap().eval(&[0.0]).unwrap();
        lt.push(t.ln());
        lz.push(z.ln());
    }
    let (slope, _, _) = linear_fit(&lt, &lz);
    assert!((slope + 1.0).abs() < 0.1, "{slope}");
}

#[test]
fn two_sided_comparability_with_scale_function() {
    let k = Arc::new(|z: &[f64]| 1.0 + 0.5 * (-z[0].abs()).exp());
    let spec = IsotropicKernelSpec::new(1, k, 1.0, 1.5);
    let sym = SymbolEvaluator::new(&spec).unwrap();
    let rho = ScaleBound::new(1.0, 0.0, 1);
    let g = FourierGrid::for_time(1.0 / 64.0, 1.0, 1, 400.0);
    let (mut lo, mut hi) = (f64::MAX, 0.0f64);
    for i in 1..=6 {
        let t = 0.5f64.powi(i);
        let kern = StableKernel::new(&sym, t, &g).unwrap();
        for &x in &[0.0, 0.1, 0.5, 1.0, 2.0, 4.0] {
            let r = kern.eval(&[x]).unwrap() / rho.eval(t, x);
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    assert!(lo > 0.05 && hi < 2.0, "[{lo}, {hi}]");
}

#[test]
fn beta_function_values() {
    assert!((beta_fn(0.5, 0.5) - PI).abs() < 1e-10);
    assert!((beta_fn(2.0, 3.0) - 1.0 / 12.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn scale_bound_nonnegative_and_monotone(g in -1.0f64..2.0, t in 1e-3f64..2.0, r in 0.0f64..10.0, dr in 0.0f64..3.0) {
        let s0 = ScaleBound::new(g, 0.0, 1);
        prop_assert!(s0.eval(t, r) >= 0.0);
        prop_assert!(s0.eval(t, r + dr) <= s0.eval(t, r));
    }

    #[test]
    fn scale_bound_factorization(g in -1.0f64..2.0, b in 0.0f64..1.0, t in 1e-3f64..2.0, r in 1e-3f64..10.0) {
        let lhs = ScaleBound::new(g, b, 2).eval(t, r);
        let rhs = t.powf(g) * r.powf(b).min(1.0) * ScaleBound::new(0.0, 0.0, 2).eval(t, r);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300));
    }

    #[test]
    fn symbol_even_and_positive(xi in 0.01f64..50.0, a in 0.0f64..2.0) {
        let k = Arc::new(move |z: &[f64]| 1.0 + a * (-z[0] * z[0]).exp());
        let spec = IsotropicKernelSpec::new(1, k, 1.0, 1.0 + a);
        let s = SymbolEvaluator::new(&spec).unwrap();
        let p = s.psi(&[xi]);
        prop_assert!(p > 0.0);
        prop_assert!((p - s.psi(&[-xi])).abs() < 1e-12 * p);
    }
}
