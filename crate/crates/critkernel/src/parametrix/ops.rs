//! Pointwise frozen kernels, a direct-quadrature q₀, and the 3P inequality probe.

use super::kernels::{FrozenKernels, KernelKind};
use super::model::ModelSpec;
use crate::base_kernels::{apply_nonlocal, beta_fn, NonlocalQuad, ScaleBound};
use crate::error::{Error, Result};
use crate::quad::Rule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t = {t} must be positive")));
    }
    Ok(())
}

/// p₀(t,x,y) = Z_y(t, x − y + b(y)t).
pub fn frozen_kernel(t: f64, x: f64, y: f64, model: &ModelSpec) -> Result<f64> {
    check_t(t)?;
    let k = FrozenKernels::new(model);
    let fam = k.family_uncached(t);
    Ok(k.eval(&fam, KernelKind::P0, x, y))
}

/// q₀(t,x,y) from the closed-form 𝓛^{k₁}Z and ∇Z of the frozen family.
pub fn q0(t: f64, x: f64, y: f64, model: &ModelSpec) -> Result<f64> {
    check_t(t)?;
    let k = FrozenKernels::new(model);
    let fam = k.family_uncached(t);
    Ok(k.eval(&fam, KernelKind::Q0, x, y))
}

/// q₀ by direct quadrature: (𝓛^{κ(x)} − 𝓛^{κ(y)}) on p₀(t,·,y) through [`apply_nonlocal`]
/// with the kernel difference, and ∇p₀ by a central difference of step `fd_step`.
pub fn q0_direct(t: f64, x: f64, y: f64, model: &ModelSpec, fd_step: f64) -> Result<f64> {
    check_t(t)?;
    if x == y {
        return Ok(0.0);
    }
    let k = FrozenKernels::new(model);
    let fam = k.family_uncached(t);
    let f = |v: &[f64]| k.eval(&fam, KernelKind::P0, v[0], y);
    let diff = |z: &[f64]| model.kappa(x, z[0]) - model.kappa(y, z[0]);
    let nl = apply_nonlocal(&f, &[x], &diff, &NonlocalQuad::default())?;
    let grad = (f(&[x + fd_step]) - f(&[x - fd_step])) / (2.0 * fd_step);
    Ok(nl + (model.drift(x) - model.drift(y)) * grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreePForm {
    /// ∫ϱ(t,x−z)ϱ(s,z−y)dz against the four-term majorant
    Spatial,
    /// ∫₀ᵗ∫ϱ(t−s,x−z)ϱ(s,z−y)dzds against the Beta-weighted majorant
    TimeIntegrated,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThreePReport {
    pub form: ThreePForm,
    pub trials: usize,
    /// Fitted constant: max LHS/RHS over the trials.
    pub worst_ratio: f64,
    pub min_ratio: f64,
}

/// ∫ϱ^{β₁}_{γ₁}(t,x−z)ϱ^{β₂}_{γ₂}(s,z−y)dz on the real line.
pub fn three_p_lhs(r1: ScaleBound, r2: ScaleBound, t: f64, s: f64, x: f64, y: f64) -> f64 {
    let f = |z: f64| r1.eval(t, x - z) * r2.eval(s, z - y);
    let mut br = vec![x, y, x - 1.0, x + 1.0, y - 1.0, y + 1.0];
    br.sort_by(f64::total_cmp);
    br.dedup();
    let mut sum = 0.0;
    // peaks and kinks sit at the breakpoints: grade every segment toward both ends
    for w in br.windows(2) {
        if w[1] > w[0] {
            sum += Rule::graded_both(w[0], w[1], 30, 8).integrate(f);
        }
    }
    // tails through z = edge ± u/(1 − u)
    let tail = Rule::graded_both(0.0, 1.0, 30, 8);
    let (lo, hi) = (br[0], br[br.len() - 1]);
    for (edge, dir) in [(hi, 1.0), (lo, -1.0)] {
        sum += tail.integrate(|u| {
            let v = u / (1.0 - u);
            f(edge + dir * v) / ((1.0 - u) * (1.0 - u))
        });
    }
    sum
}

/// Four-term majorant of the spatial 3P inequality without the constant.
pub fn three_p_rhs(b1: f64, b2: f64, g1: f64, g2: f64, t: f64, s: f64, x: f64, y: f64) -> f64 {
    let r00 = ScaleBound::new(0.0, 0.0, 1).eval(t + s, x - y);
    let r0b2 = ScaleBound::new(0.0, b2, 1).eval(t + s, x - y);
    let r0b1 = ScaleBound::new(0.0, b1, 1).eval(t + s, x - y);
    t.powf(g1 + b1 + b2 - 1.0) * s.powf(g2) * r00
        + t.powf(g1 + b1 - 1.0) * s.powf(g2) * r0b2
        + t.powf(g1) * s.powf(g2 + b1 + b2 - 1.0) * r00
        + t.powf(g1) * s.powf(g2 + b2 - 1.0) * r0b1
}

fn time_integrated_lhs(b1: f64, b2: f64, g1: f64, g2: f64, t: f64, x: f64, y: f64) -> f64 {
    let r1 = ScaleBound::new(g1, b1, 1);
    let r2 = ScaleBound::new(g2, b2, 1);
    // endpoint singularities are integrable powers of s and t − s
    Rule::graded_both(0.0, t, 40, 8).integrate(|s| three_p_lhs(r1, r2, t - s, s, x, y))
}

fn time_integrated_rhs(b1: f64, b2: f64, g1: f64, g2: f64, t: f64, x: f64, y: f64) -> f64 {
    let g = g1 + g2;
    let rho = |gam: f64, be: f64| ScaleBound::new(gam, be, 1).eval(t, x - y);
    rho(g + b1 + b2, 0.0) * beta_fn(g1 + b1 + b2, 1.0 + g2)
        + rho(g + b1, b2) * beta_fn(g1 + b1, 1.0 + g2)
        + rho(g + b1 + b2, 0.0) * beta_fn(g2 + b1 + b2, 1.0 + g1)
        + rho(g + b2, b1) * beta_fn(g2 + b2, 1.0 + g1)
}

/// One LHS/RHS ratio at a fixed (t, s, x, y).
pub fn three_p_ratio(form: ThreePForm, b: (f64, f64), g: (f64, f64), t: f64, s: f64, x: f64, y: f64) -> f64 {
    match form {
        ThreePForm::Spatial => {
            let lhs = three_p_lhs(ScaleBound::new(g.0, b.0, 1), ScaleBound::new(g.1, b.1, 1), t, s, x, y);
            lhs / three_p_rhs(b.0, b.1, g.0, g.1, t, s, x, y)
        }
        ThreePForm::TimeIntegrated => {
            time_integrated_lhs(b.0, b.1, g.0, g.1, t, x, y) / time_integrated_rhs(b.0, b.1, g.0, g.1, t, x, y)
        }
    }
}

/// Monte Carlo over (t,s,x,y): the worst LHS/RHS ratio is the fitted constant.
pub fn three_p_inequality_check(
    beta1: f64,
    beta2: f64,
    gamma1: f64,
    gamma2: f64,
    trials: usize,
    form: ThreePForm,
    seed: u64,
) -> Result<ThreePReport> {
    for b in [beta1, beta2] {
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidSpec(format!("exponent {b} outside [0,1]")));
        }
    }
    if form == ThreePForm::TimeIntegrated && !(gamma1 > -beta1 && gamma2 > -beta2) {
        return Err(Error::InvalidSpec("time-integrated form needs gamma_i > -beta_i".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let mut best = f64::INFINITY;
    for _ in 0..trials {
        let t = 10f64.powf(rng.random_range(-3.0..0.0));
        let s = 10f64.powf(rng.random_range(-3.0..0.0));
        let x = rng.random_range(-2.0..2.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let y = x + sign * 10f64.powf(rng.random_range(-3.0..1.0));
        let r = three_p_ratio(form, (beta1, beta2), (gamma1, gamma2), t, s, x, y);
        worst = worst.max(r);
        best = best.min(r);
    }
    Ok(ThreePReport { form, trials, worst_ratio: worst, min_ratio: best })
}
