//! Constant-coefficient building blocks: scale functions, Poisson kernel,
//! Lévy symbol, stable-like kernel, and the nonlocal operator.

pub mod family;
pub mod inversion;
pub mod symbol;

pub use inversion::{stable_like_kernel, FourierGrid, StableKernel};
pub use symbol::{levy_symbol, IsotropicKernelSpec, KappaFn, RadialSymbol1d, SymbolEvaluator};

use crate::error::{Error, Result};
use crate::quad::{gauss_legendre, Rule};
use statrs::function::gamma::{gamma, ln_gamma};
use std::f64::consts::PI;

/// ϱ_γ^β(t,x) = t^γ (|x|^β ∧ 1)(|x| + t)^{−d−1}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleBound {
    pub gamma: f64,
    pub beta: f64,
    pub d: usize,
}

impl ScaleBound {
    pub fn new(gamma: f64, beta: f64, d: usize) -> Self {
        Self { gamma, beta, d }
    }

    pub fn eval(&self, t: f64, r: f64) -> f64 {
        let r = r.abs();
        let cut = if self.beta == 0.0 { 1.0 } else { r.powf(self.beta).min(1.0) };
        t.powf(self.gamma) * cut * (r + t).powi(-(self.d as i32) - 1)
    }
}

/// 𝓑(a, b) = Γ(a)Γ(b)/Γ(a+b).
pub fn beta_fn(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// ρ(t,x) = π^{−(d+1)/2} Γ((d+1)/2) t (|x|² + t²)^{−(d+1)/2}.
pub fn poisson_kernel(t: f64, x: &[f64], d: usize) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::Domain(format!("poisson_kernel needs t > 0, got {t}")));
    }
    let h = 0.5 * (d as f64 + 1.0);
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(PI.powf(-h) * gamma(h) * t * (r2 + t * t).powf(-h))
}

/// Cauchy density of scale σ in d = 1 and its σ- and x-derivatives.
#[inline]
pub fn cauchy(sigma: f64, x: f64) -> f64 {
    sigma / (PI * (sigma * sigma + x * x))
}

#[inline]
pub fn cauchy_dx(sigma: f64, x: f64) -> f64 {
    let q = sigma * sigma + x * x;
    -2.0 * sigma * x / (PI * q * q)
}

#[inline]
pub fn cauchy_dsigma(sigma: f64, x: f64) -> f64 {
    let q = sigma * sigma + x * x;
    (x * x - sigma * sigma) / (PI * q * q)
}

/// δ_f(x;z) = f(x+z) + f(x−z) − 2f(x).
pub fn second_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64], z: &[f64]) -> f64 {
    let xp: Vec<f64> = x.iter().zip(z).map(|(a, b)| a + b).collect();
    let xm: Vec<f64> = x.iter().zip(z).map(|(a, b)| a - b).collect();
    f(&xp) + f(&xm) - 2.0 * f(x)
}

/// Radial quadrature controls for [`apply_nonlocal`].
#[derive(Clone, Copy, Debug)]
pub struct NonlocalQuad {
    /// Dyadic levels toward |z| = 0 inside the unit ball.
    pub levels: usize,
    pub order: usize,
    /// Uniform panels of this width on [1, r_outer] resolve oscillating fields.
    pub width: f64,
    /// Beyond r_outer, f(x±r) is replaced by its mean over [r_outer/2, r_outer].
    pub r_outer: f64,
    pub tol: f64,
    /// Angular panels (6 Gauss nodes each) for d = 2.
    pub angles: usize,
}

impl Default for NonlocalQuad {
    fn default() -> Self {
        Self { levels: 20, order: 8, width: 1.0, r_outer: 1000.0, tol: 1e-6, angles: 32 }
    }
}

impl NonlocalQuad {
    pub fn refined(&self) -> Self {
        Self { levels: self.levels + 4, order: self.order + 4, width: 0.5 * self.width, angles: 2 * self.angles, ..*self }
    }
}

fn radial_rule(q: &NonlocalQuad) -> Rule {
    let mut rule = Rule::graded(0.0, 1.0, q.levels, 2.0, q.order);
    let gl = gauss_legendre(q.order);
    let mut a = 1.0;
    while a < q.r_outer {
        let b = (a + q.width).min(q.r_outer);
        rule.push_panel(a, b, &gl);
        a = b;
    }
    rule
}

fn nonlocal_with(f: &dyn Fn(&[f64]) -> f64, x: &[f64], kappa: &dyn Fn(&[f64]) -> f64, q: &NonlocalQuad) -> f64 {
    let rule = radial_rule(q);
    let r0 = rule.nodes[0];
    let d = x.len();
    let fx = f(x);
    let radial = |e: &[f64]| {
        let mut s = 0.0;
        let (mut far, mut far_w) = (0.0, 0.0);
        for (&r, &w) in rule.nodes.iter().zip(&rule.weights) {
            let z: Vec<f64> = e.iter().map(|v| v * r).collect();
            let dd = second_difference(f, x, &z);
            s += w * dd * kappa(&z) / (r * r);
            if r > 0.5 * q.r_outer {
                far += w * (dd + 2.0 * fx);
                far_w += w;
            }
        }
        // innermost cell [0, r0/2]: δ_f ≈ f''r², integrand ≈ f''κ
        let z: Vec<f64> = e.iter().map(|v| v * r0).collect();
        s += second_difference(f, x, &z) / (r0 * r0) * kappa(&z) * 0.5 * r0;
        // far tail: f(x±r) by its mean over the outer half, κ frozen at r_outer
        let zf: Vec<f64> = e.iter().map(|v| v * q.r_outer).collect();
        s + (far / far_w - 2.0 * fx) * kappa(&zf) / q.r_outer
    };
    if d == 1 {
        radial(&[1.0])
    } else {
        // ½∫_0^{2π} = ∫_0^π by z → −z symmetry of δ_f
        let (ax, aw) = gauss_legendre(6);
        let h = PI / q.angles as f64;
        let mut s = 0.0;
        for p in 0..q.angles {
            for (a, w) in ax.iter().zip(&aw) {
                let th = h * (p as f64 + 0.5 * (a + 1.0));
                s += 0.5 * h * w * radial(&[th.cos(), th.sin()]);
            }
        }
        s
    }
}

/// 𝓛^κ f(x) = ½∫ δ_f(x;z) κ(z)|z|^{−d−1} dz; compares two resolutions.
pub fn apply_nonlocal(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    kappa_at_x: &dyn Fn(&[f64]) -> f64,
    quad: &NonlocalQuad,
) -> Result<f64> {
    let coarse = nonlocal_with(f, x, kappa_at_x, quad);
    let fine = nonlocal_with(f, x, kappa_at_x, &quad.refined());
    if (fine - coarse).abs() > quad.tol * (1.0 + fine.abs()) {
        return Err(Error::Unreliable {
            estimate: fine,
            msg: format!("refinements differ by {:.2e}", (fine - coarse).abs()),
        });
    }
    Ok(fine)
}

/// Single-resolution variant used inside other quadratures.
pub fn apply_nonlocal_fixed(
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    kappa_at_x: &dyn Fn(&[f64]) -> f64,
    quad: &NonlocalQuad,
) -> f64 {
    nonlocal_with(f, x, kappa_at_x, quad)
}

/// Residual of Z^κ̄(t,x) = ∫ρ(κ₀t/2, x−z) Z^{κ̄−κ₀/2}(t,z)dz on a probe lattice (d = 1).
pub fn convolution_identity_check(t: f64, spec: &IsotropicKernelSpec, kappa0: f64) -> Result<f64> {
    if spec.d != 1 {
        return Err(Error::InvalidSpec("convolution identity check implemented for d = 1".into()));
    }
    if spec.kappa0_bar < kappa0 {
        return Err(Error::InvalidSpec("kappa_bar must dominate kappa0".into()));
    }
    let k = spec.kappa_bar.clone();
    let hat = IsotropicKernelSpec {
        d: 1,
        kappa_bar: std::sync::Arc::new(move |z| k(z) - kappa0 / 2.0),
        kappa0_bar: spec.kappa0_bar - kappa0 / 2.0,
        kappa1_bar: spec.kappa1_bar - kappa0 / 2.0,
        kappa_inf: spec.kappa_inf.map(|v| v - kappa0 / 2.0),
    };
    let grid = FourierGrid::for_time(t, hat.kappa0_bar, 1, 400.0);
    let lhs = StableKernel::new(&SymbolEvaluator::new(spec)?, t, &grid)?;
    let inner = StableKernel::new(&SymbolEvaluator::new(&hat)?, t, &grid)?;
    // ρ(τ,·) is the kernel of Δ^{1/2}; κ ≡ κ₀/2 generates (κ₀/2)π|ξ|, so τ = πκ₀t/2
    let s = PI * kappa0 * t / 2.0;
    let mut worst: f64 = 0.0;
    let rule = Rule::graded_both(-1.0, 1.0, 12, 16);
    for i in -8..=8 {
        let x = 0.5 * i as f64;
        // z = x + s tan(πu/2): Cauchy weight becomes uniform
        let rhs = rule.integrate(|u| {
            let z = x + s * (0.5 * PI * u).tan();
            0.5 * inner.eval(&[z]).unwrap()
        });
        worst = worst.max((lhs.eval(&[x])? - rhs).abs());
    }
    Ok(worst)
}
