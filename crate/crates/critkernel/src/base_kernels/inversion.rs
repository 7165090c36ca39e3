//! Fourier inversion of exp(−tψ) and cached kernel families.

use super::symbol::{IsotropicKernelSpec, SymbolEvaluator};
use crate::error::{Error, Result};
use crate::special::bessel_j0;
use std::f64::consts::PI;

/// Uniform frequency lattice ξ_k = kΔξ, |k| ≤ M/2, Δξ = 2Ξ/M.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierGrid {
    pub xi_max: f64,
    pub m: usize,
    /// Period of the implied spatial lattice, 2π/Δξ.
    pub extent: f64,
}

impl FourierGrid {
    pub fn new(xi_max: f64, m: usize) -> Result<Self> {
        if m % 2 != 0 || m < 4 || xi_max <= 0.0 {
            return Err(Error::InvalidSpec("FourierGrid needs even M >= 4 and Xi > 0".into()));
        }
        Ok(Self { xi_max, m, extent: PI * m as f64 / xi_max })
    }

    /// Cutoff from exp(−t κ̄₀ ψ-rate Ξ) < 1e−12 at `t_min`, period ≥ `extent`.
    pub fn for_time(t_min: f64, kappa0_bar: f64, d: usize, extent: f64) -> Self {
        let rate = if d == 1 { PI } else { 2.0 * PI } * kappa0_bar;
        let xi_max = 12.0 * std::f64::consts::LN_10 / (t_min * rate);
        let dxi = 2.0 * PI / extent;
        let mut m = (2.0 * xi_max / dxi).ceil() as usize;
        m += m % 2;
        Self { xi_max, m, extent: 2.0 * PI * m as f64 / (2.0 * xi_max) }
    }

    pub fn dxi(&self) -> f64 {
        2.0 * self.xi_max / self.m as f64
    }

    /// A-priori error model: truncation of the frequency sum plus spatial aliasing.
    pub fn error_model(&self, t: f64, x: f64, spec: &IsotropicKernelSpec) -> f64 {
        let rate = if spec.d == 1 { PI } else { 2.0 * PI } * spec.kappa0_bar;
        let trunc = (-t * rate * self.xi_max).exp() / (PI * t * rate);
        let gap = (self.extent - x.abs()).max(1e-12);
        let alias = 4.0 * t * spec.kappa1_bar / (gap * gap);
        trunc + alias
    }
}

/// Heat kernel Z^κ̄(t, x) of 𝓛^κ̄ by trapezoid Fourier inversion on `grid`.
pub fn stable_like_kernel(t: f64, x: &[f64], spec: &IsotropicKernelSpec, grid: &FourierGrid) -> Result<f64> {
    let sym = SymbolEvaluator::new(spec)?;
    StableKernel::new(&sym, t, grid)?.eval(x)
}

/// Precomputed exp(−tψ) samples for repeated evaluation at one time.
pub struct StableKernel {
    d: usize,
    dxi: f64,
    weights: Vec<f64>,
    t: f64,
}

impl StableKernel {
    pub fn new(sym: &SymbolEvaluator, t: f64, grid: &FourierGrid) -> Result<Self> {
        if t <= 0.0 {
            return Err(Error::Domain(format!("t = {t} must be positive")));
        }
        let err = grid.error_model(t, 0.0, &sym.spec);
        if err > 1e-4 {
            return Err(Error::GridTooCoarse(format!("normalization error model {err:.2e} at t = {t}")));
        }
        let dxi = grid.dxi();
        let n = grid.m / 2;
        // d = 2 only for radial κ̄: Hankel form on |ξ|
        let weights = (0..=n).map(|k| (-t * sym.psi(&axis(sym.spec.d, k as f64 * dxi))).exp()).collect();
        Ok(Self { d: sym.spec.d, dxi, weights, t })
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let dxi = self.dxi;
        if self.d == 1 {
            let mut s = 0.5 * self.weights[0];
            for (k, w) in self.weights.iter().enumerate().skip(1) {
                s += w * (k as f64 * dxi * x[0]).cos();
            }
            Ok(s * dxi / PI)
        } else {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let mut s = 0.0;
            for (k, w) in self.weights.iter().enumerate().skip(1) {
                let rho = k as f64 * dxi;
                s += w * bessel_j0(rho * r) * rho;
            }
            Ok(s * dxi / (2.0 * PI))
        }
    }

    /// ∂ₓZ in d = 1.
    pub fn grad(&self, x: f64) -> Result<f64> {
        if self.d != 1 {
            return Err(Error::InvalidSpec("StableKernel::grad is implemented for d = 1".into()));
        }
        let dxi = self.dxi;
        let mut s = 0.0;
        for (k, w) in self.weights.iter().enumerate().skip(1) {
            let xi = k as f64 * dxi;
            s -= w * xi * (xi * x).sin();
        }
        Ok(s * dxi / PI)
    }

    pub fn time(&self) -> f64 {
        self.t
    }
}

fn axis(d: usize, v: f64) -> Vec<f64> {
    if d == 1 {
        vec![v]
    } else {
        vec![v, 0.0]
    }
}
