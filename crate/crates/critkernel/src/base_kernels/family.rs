//! Frozen-coefficient kernel families for separable intensities
//! κ(x,z) = k₀(z) + a(x)k₁(z) in d = 1.
//!
//! For a frozen value a, ψ_a = c_a|ξ| + ψ₀ʳ + aψ₁ʳ with c_a = π(k₀(∞) + a k₁(∞)).
//! The Cauchy part is evaluated in closed form; the remainder goes through one
//! FFT per Chebyshev node in a, tabulated on a lattice of spacing ≤ τ/8.

use super::symbol::RadialSymbol1d;
use super::{cauchy, cauchy_dsigma, cauchy_dx};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

const PERIOD: f64 = 64.0;
const W_STORE: f64 = 24.0;

/// Radial profile with its limit at infinity.
#[derive(Clone)]
pub struct Profile {
    pub g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub at_inf: f64,
}

impl Profile {
    pub fn constant(c: f64) -> Self {
        Self { g: Arc::new(move |_| c), at_inf: c }
    }

    pub fn new(g: impl Fn(f64) -> f64 + Send + Sync + 'static, at_inf: f64) -> Self {
        Self { g: Arc::new(g), at_inf }
    }

    pub fn is_constant(&self) -> bool {
        (0..40).all(|k| ((self.g)(0.001 * 1.4f64.powi(k)) - self.at_inf).abs() < 1e-15)
    }
}

/// Remainder symbols of k₀ and k₁ cached on ξ_k = kΔξ.
pub struct FamilySymbols {
    pub k0: Profile,
    pub k1: Option<Profile>,
    pub kappa0: f64,
    psi0: Option<RadialSymbol1d>,
    psi1: Option<RadialSymbol1d>,
    cache: Mutex<Vec<[f64; 2]>>,
}

impl FamilySymbols {
    pub fn new(k0: Profile, k1: Option<Profile>, kappa0: f64) -> Self {
        let rem = |p: &Profile| {
            let (g, c) = (p.g.clone(), p.at_inf);
            (!p.is_constant()).then(|| RadialSymbol1d::new(&move |r| g(r) - c))
        };
        let psi0 = rem(&k0);
        let psi1 = k1.as_ref().and_then(rem);
        Self { k0, k1, kappa0, psi0, psi1, cache: Mutex::new(Vec::new()) }
    }

    pub fn k1_inf(&self) -> f64 {
        self.k1.as_ref().map_or(0.0, |p| p.at_inf)
    }

    /// No remainder anywhere: every frozen kernel is an exact Cauchy density.
    pub fn pure_cauchy(&self) -> bool {
        self.psi0.is_none() && self.psi1.is_none()
    }

    pub fn dxi() -> f64 {
        2.0 * PI / PERIOD
    }

    /// Remainder symbols (ψ₀ʳ, ψ₁ʳ) at ξ_k for k < n.
    pub fn remainders(&self, n: usize) -> Vec<[f64; 2]> {
        let mut c = self.cache.lock().unwrap();
        let dxi = Self::dxi();
        while c.len() < n {
            let xi = c.len() as f64 * dxi;
            let a = self.psi0.as_ref().map_or(0.0, |s| s.psi(xi));
            let b = self.psi1.as_ref().map_or(0.0, |s| s.psi(xi));
            c.push([a, b]);
        }
        c[..n].to_vec()
    }

    pub fn speed(&self, a: f64) -> f64 {
        PI * (self.k0.at_inf + a * self.k1_inf())
    }
}

/// Values of Z_a(τ,w), ∂_wZ_a(τ,w) and 𝓛^{k₁}Z_a(τ,w).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrozenValues {
    pub z: f64,
    pub dz: f64,
    pub l1z: f64,
}

pub struct KernelFamily {
    pub tau: f64,
    a_nodes: Vec<f64>,
    a_bw: Vec<f64>,
    delta: f64,
    half: usize,
    /// per a-node: remainders of Z, ∂Z, 𝓛^{k₁}Z on w = jδ, |j| ≤ half
    tables: Vec<[Vec<f64>; 3]>,
    speeds: Vec<f64>,
    k1_inf: f64,
    syms: Arc<FamilySymbols>,
}

impl KernelFamily {
    pub fn new(syms: Arc<FamilySymbols>, tau: f64, a_range: (f64, f64)) -> Self {
        let (lo, hi) = a_range;
        let n_a = if syms.k1.is_none() || hi - lo < 1e-14 { 1 } else { 11 };
        let a_nodes: Vec<f64> = if n_a == 1 {
            vec![0.5 * (lo + hi)]
        } else {
            (0..n_a)
                .map(|j| 0.5 * (lo + hi) - 0.5 * (hi - lo) * (PI * j as f64 / (n_a - 1) as f64).cos())
                .collect()
        };
        let a_bw = crate::quad::bary_weights(&a_nodes);
        let k1_inf = syms.k1_inf();
        let speeds: Vec<f64> = a_nodes.iter().map(|&a| syms.speed(a)).collect();
        if syms.pure_cauchy() {
            return Self { tau, a_nodes, a_bw, delta: 1.0, half: 0, tables: Vec::new(), speeds, k1_inf, syms };
        }
        let dxi = FamilySymbols::dxi();
        let xi_cut = 40.0 / (tau * PI * syms.kappa0);
        let need = (8.0 * PERIOD / tau).max(2.0 * xi_cut / dxi);
        let m = need.ceil().max(256.0) as usize;
        let m = m.next_power_of_two();
        let delta = PERIOD / m as f64;
        let half = ((W_STORE / delta) as usize).min(m / 2 - 1);
        let k_cut = ((xi_cut / dxi) as usize).min(m / 2);
        let rem = syms.remainders(k_cut + 1);
        let fft = FftPlanner::new().plan_fft_inverse(m);
        let mut tables = Vec::with_capacity(n_a);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        for (&a, &c) in a_nodes.iter().zip(&speeds) {
            let mut out: [Vec<f64>; 3] = Default::default();
            for (kind, slot) in out.iter_mut().enumerate() {
                buf.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                for (k, r) in rem.iter().enumerate() {
                    let xi = k as f64 * dxi;
                    let pr = r[0] + a * r[1];
                    let base = (-tau * c * xi).exp();
                    let full = base * (-tau * pr).exp();
                    let val = match kind {
                        0 => Complex64::new(base * (-tau * pr).exp_m1(), 0.0),
                        1 => Complex64::new(0.0, xi * base * (-tau * pr).exp_m1()),
                        _ => Complex64::new(-(PI * k1_inf * xi + r[1]) * full + PI * k1_inf * xi * base, 0.0),
                    };
                    buf[k] = val;
                    if k > 0 {
                        buf[m - k] = val.conj();
                    }
                }
                fft.process(&mut buf);
                let scale = dxi / (2.0 * PI);
                let mut v = vec![0.0; 2 * half + 1];
                for j in 0..=half {
                    v[half + j] = buf[j].re * scale;
                    if j > 0 {
                        v[half - j] = buf[m - j].re * scale;
                    }
                }
                *slot = v;
            }
            tables.push(out);
        }
        Self { tau, a_nodes, a_bw, delta, half, tables, speeds, k1_inf, syms }
    }

    pub fn symbols(&self) -> &Arc<FamilySymbols> {
        &self.syms
    }

    fn interp(&self, node: usize, w: f64) -> [f64; 3] {
        let u = w / self.delta + self.half as f64;
        let i = u.floor() as isize;
        if i < 1 || i + 2 > 2 * self.half as isize {
            return [0.0; 3];
        }
        let f = u - i as f64;
        // cubic Lagrange on i-1..i+2
        let c = [
            -f * (f - 1.0) * (f - 2.0) / 6.0,
            (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
            -(f + 1.0) * f * (f - 2.0) / 2.0,
            (f + 1.0) * f * (f - 1.0) / 6.0,
        ];
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let t = &self.tables[node][k];
            let i = i as usize;
            *o = c[0] * t[i - 1] + c[1] * t[i] + c[2] * t[i + 1] + c[3] * t[i + 2];
        }
        out
    }

    /// Frozen kernel quantities at intensity parameter `a` and displacement `w`.
    pub fn eval(&self, a: f64, w: f64) -> FrozenValues {
        let c = self.syms.speed(a);
        let s = c * self.tau;
        let mut v = FrozenValues {
            z: cauchy(s, w),
            dz: cauchy_dx(s, w),
            l1z: PI * self.k1_inf * cauchy_dsigma(s, w),
        };
        if self.tables.is_empty() {
            return v;
        }
        if self.a_nodes.len() == 1 {
            let r = self.interp(0, w);
            v.z += r[0];
            v.dz += r[1];
            v.l1z += r[2];
            return v;
        }
        let mut buf = [0.0; 16];
        let basis = &mut buf[..self.a_nodes.len()];
        crate::quad::lagrange_basis(&self.a_nodes, &self.a_bw, a, basis);
        for (j, b) in basis.iter().enumerate() {
            let r = self.interp(j, w);
            v.z += b * r[0];
            v.dz += b * r[1];
            v.l1z += b * r[2];
        }
        v
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_cauchy_family_is_closed_form() {
        let syms = Arc::new(FamilySymbols::new(Profile::constant(1.0), None, 1.0));
        let fam = KernelFamily::new(syms, 0.5, (0.0, 0.0));
        let v = fam.eval(0.0, 0.3);
        assert!((v.z - cauchy(0.5 * PI, 0.3)).abs() < 1e-15);
    }

    #[test]
    fn exponential_family_matches_direct_inversion() {
        // κ = 1 + a·½e^{−|z|}; compare with a slow direct cosine sum
        let k1 = Profile::new(|r| 0.5 * (-r).exp(), 0.0);
        let syms = Arc::new(FamilySymbols::new(Profile::constant(1.0), Some(k1), 1.0));
        for &tau in &[0.05, 0.5] {
            let fam = KernelFamily::new(syms.clone(), tau, (0.0, 1.0));
            let a = 0.37;
            for &w in &[0.0, 0.11, -0.7, 2.5] {
                let psi = |xi: f64| PI * xi + a * (xi * xi.atan() - 0.5 * (1.0 + xi * xi).ln());
                let dxi = 1e-3;
                let mut z = 0.0;
                let mut k = 0;
                loop {
                    let xi = (k as f64 + 0.5) * dxi;
                    let e = (-tau * psi(xi)).exp();
                    if e < 1e-16 {
                        break;
                    }
                    z += e * (xi * w).cos() * dxi / PI;
                    k += 1;
                }
                let v = fam.eval(a, w);
                assert!((v.z - z).abs() < 1e-6 * z.max(1.0), "tau={tau} w={w}: {} vs {z}", v.z);
            }
        }
    }
}
