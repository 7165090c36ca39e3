//! Radial Filon quadrature for the Lévy symbol.

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::special::si;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

pub type KappaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Jump intensity κ̄ of a symmetric Lévy measure ν(dz) = κ̄(z)|z|^{-d-1}dz.
#[derive(Clone)]
pub struct IsotropicKernelSpec {
    pub d: usize,
    pub kappa_bar: KappaFn,
    pub kappa0_bar: f64,
    pub kappa1_bar: f64,
    /// Limit of κ̄ at infinity along rays, when known; used for Cauchy subtraction.
    pub kappa_inf: Option<f64>,
}

impl std::fmt::Debug for IsotropicKernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IsotropicKernelSpec")
            .field("d", &self.d)
            .field("kappa0_bar", &self.kappa0_bar)
            .field("kappa1_bar", &self.kappa1_bar)
            .finish()
    }
}

impl IsotropicKernelSpec {
    pub fn constant(d: usize, c: f64) -> Self {
        Self { d, kappa_bar: Arc::new(move |_| c), kappa0_bar: c, kappa1_bar: c, kappa_inf: Some(c) }
    }

    pub fn new(d: usize, kappa_bar: KappaFn, kappa0_bar: f64, kappa1_bar: f64) -> Self {
        Self { d, kappa_bar, kappa0_bar, kappa1_bar, kappa_inf: None }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        (self.kappa_bar)(z)
    }

    /// Is κ̄ exactly constant (declared bounds coincide)?
    pub fn is_constant(&self) -> bool {
        self.kappa0_bar == self.kappa1_bar
    }

    /// Probe symmetry and the declared bounds.
    pub fn validate(&self) -> Result<()> {
        if self.d != 1 && self.d != 2 {
            return Err(Error::InvalidSpec(format!("dimension {} not in {{1,2}}", self.d)));
        }
        if !(self.kappa0_bar > 0.0 && self.kappa0_bar <= self.kappa1_bar) {
            return Err(Error::InvalidSpec("need 0 < kappa0_bar <= kappa1_bar".into()));
        }
        for k in 0..64 {
            let r = 0.01 * 1.2f64.powi(k);
            let th = 0.7 * k as f64;
            let z: Vec<f64> = if self.d == 1 { vec![r] } else { vec![r * th.cos(), r * th.sin()] };
            let mz: Vec<f64> = z.iter().map(|v| -v).collect();
            let (a, b) = (self.eval(&z), self.eval(&mz));
            if (a - b).abs() > 1e-10 * (1.0 + a.abs()) {
                return Err(Error::InvalidSpec(format!("kappa_bar not symmetric at |z| = {r:.3}")));
            }
            if a < self.kappa0_bar - 1e-12 || a > self.kappa1_bar + 1e-12 {
                return Err(Error::InvalidSpec(format!("kappa_bar({r:.3}) = {a} outside declared bounds")));
            }
        }
        Ok(())
    }
}

const ORDER: usize = 12;
const R_MIN: f64 = 1e-9;
pub const R_TAIL: f64 = 64.0;

/// Panel layout on (0, R_TAIL]: geometric toward 0 below 1, growing above 1.
#[derive(Clone, Debug)]
pub struct RadialRule {
    pub edges: Vec<f64>,
    pub nodes: Vec<f64>,
    gl_x: Vec<f64>,
    gl_w: Vec<f64>,
    inv_vdm: Vec<f64>,
}

impl Default for RadialRule {
    fn default() -> Self {
        Self::new()
    }
}

impl RadialRule {
    pub fn new() -> Self {
        let mut edges = vec![R_MIN];
        let mut r = R_MIN;
        while r < 0.5 {
            r *= 2.0;
            edges.push(r.min(1.0));
        }
        if *edges.last().unwrap() < 1.0 {
            edges.push(1.0);
        }
        let mut w = 0.25;
        let mut r = 1.0;
        while r < R_TAIL {
            r = (r + w).min(R_TAIL);
            edges.push(r);
            w = (w * 1.3).min(4.0);
        }
        let (gl_x, gl_w) = gauss_legendre(ORDER);
        let mut nodes = Vec::new();
        for p in edges.windows(2) {
            let (c, h) = (0.5 * (p[0] + p[1]), 0.5 * (p[1] - p[0]));
            nodes.extend(gl_x.iter().map(|x| c + h * x));
        }
        let inv_vdm = invert_vandermonde(&gl_x);
        Self { edges, nodes, gl_x, gl_w, inv_vdm }
    }

    /// ∫_0^∞ (1 − cos ωr) g(r) r^{-2} dr, with `g_nodes` = g at `self.nodes`,
    /// `g0` ≈ g(0+) and `g_tail` the value g takes beyond R_TAIL.
    pub fn integrate(&self, omega: f64, g_nodes: &[f64], g0: f64, g_tail: f64) -> f64 {
        let omega = omega.abs();
        if omega == 0.0 {
            return 0.0;
        }
        let mut total = g0 * omega * omega * R_MIN / 2.0;
        let mut coef = [0.0; ORDER];
        for (p, e) in self.edges.windows(2).enumerate() {
            let (a, b) = (e[0], e[1]);
            let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
            let g = &g_nodes[p * ORDER..(p + 1) * ORDER];
            if omega * b < 0.5 {
                // no oscillation: 1 − cos = 2 sin² avoids cancellation
                for j in 0..ORDER {
                    let r = c + h * self.gl_x[j];
                    let s = (0.5 * omega * r).sin();
                    total += h * self.gl_w[j] * 2.0 * s * s * g[j] / (r * r);
                }
                continue;
            }
            let mut plain = 0.0;
            let mut f = [0.0; ORDER];
            for j in 0..ORDER {
                let r = c + h * self.gl_x[j];
                f[j] = g[j] / (r * r);
                plain += h * self.gl_w[j] * f[j];
            }
            for (i, ci) in coef.iter_mut().enumerate() {
                *ci = (0..ORDER).map(|j| self.inv_vdm[i * ORDER + j] * f[j]).sum();
            }
            let m = moments(omega * h);
            let s: Complex64 = coef.iter().zip(m.iter()).map(|(c, m)| *c * m).sum();
            let osc = (Complex64::from_polar(1.0, omega * c) * s).re * h;
            total += plain - osc;
        }
        let x = omega * R_TAIL;
        total + g_tail * ((1.0 - x.cos()) / R_TAIL + omega * (PI / 2.0 - si(x)))
    }
}

/// Monomial moments ∫_{-1}^{1} τ^k e^{iμτ} dτ, k < ORDER.
fn moments(mu: f64) -> [Complex64; ORDER] {
    let mut m = [Complex64::new(0.0, 0.0); ORDER];
    if mu.abs() <= 14.0 {
        let i_mu = Complex64::new(0.0, mu);
        for (k, mk) in m.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..120 {
                if (k + j) % 2 == 0 {
                    acc += term * (2.0 / (k + j + 1) as f64);
                }
                term = term * i_mu / (j + 1) as f64;
                if term.norm() < 1e-18 && j > mu.abs() as usize {
                    break;
                }
            }
            *mk = acc;
        }
    } else {
        let e_p = Complex64::from_polar(1.0, mu);
        let e_m = Complex64::from_polar(1.0, -mu);
        let i_mu = Complex64::new(0.0, mu);
        m[0] = Complex64::new(2.0 * mu.sin() / mu, 0.0);
        for k in 1..ORDER {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            m[k] = (e_p - sign * e_m) / i_mu - (k as f64 / i_mu) * m[k - 1];
        }
    }
    m
}

fn invert_vandermonde(x: &[f64]) -> Vec<f64> {
    // inverse of V[j][i] = x_j^i via Gauss-Jordan
    let n = x.len();
    let mut a = vec![0.0; n * 2 * n];
    for j in 0..n {
        for i in 0..n {
            a[j * 2 * n + i] = x[j].powi(i as i32);
        }
        a[j * 2 * n + n + j] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&p, &q| a[p * 2 * n + col].abs().total_cmp(&a[q * 2 * n + col].abs()))
            .unwrap();
        for k in 0..2 * n {
            a.swap(col * 2 * n + k, piv * 2 * n + k);
        }
        let d = a[col * 2 * n + col];
        for k in 0..2 * n {
            a[col * 2 * n + k] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r * 2 * n + col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        a[r * 2 * n + k] -= f * a[col * 2 * n + k];
                    }
                }
            }
        }
    }
    // V^{-1}: coefficient i = Σ_j inv[i][j] f_j
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            inv[i * n + j] = a[i * 2 * n + n + j];
        }
    }
    inv
}

/// Lévy symbol with κ̄ cached on the radial nodes.
pub struct SymbolEvaluator {
    pub spec: IsotropicKernelSpec,
    rule: RadialRule,
    cache: Vec<f64>,
    g0: f64,
    g_tail: f64,
    ang_x: Vec<f64>,
    ang_w: Vec<f64>,
}

impl SymbolEvaluator {
    pub fn new(spec: &IsotropicKernelSpec) -> Result<Self> {
        spec.validate()?;
        let rule = RadialRule::new();
        let (cache, g0, g_tail) = if spec.d == 1 {
            let c = rule.nodes.iter().map(|&r| spec.eval(&[r])).collect();
            (c, spec.eval(&[R_MIN]), spec.eval(&[R_TAIL]))
        } else {
            (Vec::new(), 0.0, 0.0)
        };
        let (ang_x, ang_w) = gauss_legendre(24);
        Ok(Self { spec: spec.clone(), rule, cache, g0, g_tail, ang_x, ang_w })
    }

    pub fn psi(&self, xi: &[f64]) -> f64 {
        if self.spec.d == 1 {
            return 2.0 * self.rule.integrate(xi[0], &self.cache, self.g0, self.g_tail);
        }
        let norm = (xi[0] * xi[0] + xi[1] * xi[1]).sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let th0 = xi[1].atan2(xi[0]);
        // four angular panels with the kinks of |cos| at the panel edges
        let mut total = 0.0;
        for p in 0..4 {
            let a = th0 - PI / 2.0 + p as f64 * PI / 2.0;
            let (c, h) = (a + PI / 4.0, PI / 4.0);
            for (x, w) in self.ang_x.iter().zip(&self.ang_w) {
                let th = c + h * x;
                let e = [th.cos(), th.sin()];
                let g: Vec<f64> = self.rule.nodes.iter().map(|&r| self.spec.eval(&[r * e[0], r * e[1]])).collect();
                let g0 = self.spec.eval(&[R_MIN * e[0], R_MIN * e[1]]);
                let gt = self.spec.eval(&[R_TAIL * e[0], R_TAIL * e[1]]);
                let om = norm * (th - th0).cos();
                total += h * w * self.rule.integrate(om, &g, g0, gt);
            }
        }
        total
    }
}

/// ψ(ξ) = ∫(1 − cos ξ·z) κ̄(z)|z|^{-d-1} dz.
pub fn levy_symbol(xi: &[f64], spec: &IsotropicKernelSpec) -> Result<f64> {
    Ok(SymbolEvaluator::new(spec)?.psi(xi))
}

/// Symbol of a radial profile g in d = 1 (no positivity needed): 2∫_0^∞(1−cos ξr) g(r) r^{-2} dr.
pub struct RadialSymbol1d {
    rule: RadialRule,
    cache: Vec<f64>,
    g0: f64,
    g_tail: f64,
}

impl RadialSymbol1d {
    pub fn new(g: &dyn Fn(f64) -> f64) -> Self {
        let rule = RadialRule::new();
        let cache = rule.nodes.iter().map(|&r| g(r)).collect();
        Self { g0: g(R_MIN), g_tail: g(R_TAIL), rule, cache }
    }

    pub fn psi(&self, xi: f64) -> f64 {
        2.0 * self.rule.integrate(xi, &self.cache, self.g0, self.g_tail)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_series_and_recursion_agree() {
        let a = moments(14.0);
        let b = moments(14.000001);
        for k in 0..ORDER {
            assert!((a[k] - b[k]).norm() < 1e-5, "k={k}");
        }
    }

    #[test]
    fn constant_symbol_is_pi_abs_xi() {
        let s = SymbolEvaluator::new(&IsotropicKernelSpec::constant(1, 1.0)).unwrap();
        for &xi in &[1e-3, 0.3, 1.0, 7.5, 150.0, 4000.0] {
            let v = s.psi(&[xi]);
            assert!((v - PI * xi).abs() < 1e-8 * xi.max(1.0), "xi={xi}: {v}");
        }
    }

    #[test]
    fn exponential_profile_closed_form() {
        let s = RadialSymbol1d::new(&|r: f64| (-r).exp());
        for &xi in &[0.01f64, 0.5, 1.0, 3.0, 40.0, 900.0] {
            let exact = 2.0 * (xi * xi.atan() - 0.5 * (1.0 + xi * xi).ln());
            assert!((s.psi(xi) - exact).abs() < 1e-8 * exact.max(1e-4), "xi={xi}");
        }
    }

    #[test]
    fn d2_constant_symbol() {
        let s = SymbolEvaluator::new(&IsotropicKernelSpec::constant(2, 1.0)).unwrap();
        let v = s.psi(&[0.6, 0.8]);
        assert!((v - 2.0 * PI).abs() < 1e-6, "{v}");
    }
}
