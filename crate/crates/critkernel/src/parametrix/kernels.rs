//! Pointwise frozen kernels p₀, ∇p₀, q₀ and their hat-integrated lattice matrices.

use super::grid::SpaceGrid;
use super::model::ModelSpec;
use crate::base_kernels::family::{FamilySymbols, KernelFamily};
use crate::linalg::Mat;
use crate::quad::gauss_legendre;
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelKind {
    P0,
    DP0,
    Q0,
}

/// Frozen kernels of one model with a cache of kernel families keyed by time.
pub struct FrozenKernels {
    pub model: ModelSpec,
    syms: Arc<FamilySymbols>,
    cache: Mutex<HashMap<u64, Arc<KernelFamily>>>,
    gl: (Vec<f64>, Vec<f64>),
}

impl FrozenKernels {
    pub fn new(model: &ModelSpec) -> Self {
        let syms = Arc::new(FamilySymbols::new(model.k0.clone(), model.k1.clone(), model.kappa0));
        Self { model: model.clone(), syms, cache: Mutex::new(HashMap::new()), gl: gauss_legendre(6) }
    }

    /// Cached family at time τ.
    pub fn family(&self, tau: f64) -> Arc<KernelFamily> {
        let key = tau.to_bits();
        if let Some(f) = self.cache.lock().unwrap().get(&key) {
            return f.clone();
        }
        let f = Arc::new(self.family_uncached(tau));
        self.cache.lock().unwrap().insert(key, f.clone());
        f
    }

    pub fn family_uncached(&self, tau: f64) -> KernelFamily {
        KernelFamily::new(self.syms.clone(), tau, self.model.a_range)
    }

    pub fn clear_cache(&self) {
        self.cache.lock().unwrap().clear();
    }

    /// Kernel value with frozen (second) point y.
    #[inline]
    pub fn eval(&self, fam: &KernelFamily, kind: KernelKind, x: f64, y: f64) -> f64 {
        let m = &self.model;
        let ay = m.a_at(y);
        let by = m.drift(y);
        let v = fam.eval(ay, x - y + by * fam.tau);
        match kind {
            KernelKind::P0 => v.z,
            KernelKind::DP0 => v.dz,
            KernelKind::Q0 => {
                let da = if m.k1.is_some() { m.a_at(x) - ay } else { 0.0 };
                let db = if m.b_constant { 0.0 } else { m.drift(x) - by };
                da * v.l1z + db * v.dz
            }
        }
    }

    /// Lattice values K(τ, x_i, y_j).
    pub fn point_matrix(&self, fam: &KernelFamily, kind: KernelKind, g: &SpaceGrid) -> Mat {
        let mut m = Mat::zeros(g.n);
        let xs = g.points();
        for i in 0..g.n {
            for j in 0..g.n {
                m.set(i, j, self.eval(fam, kind, xs[i], xs[j]));
            }
        }
        m
    }

    fn band(&self, tau: f64, g: &SpaceGrid) -> usize {
        3 + (self.model.b_sup * tau / g.h).ceil() as usize
    }

    /// M_ij = ∫ K(τ, x_i, z) φ_j(z) dz: exact near the peak, trapezoid elsewhere.
    pub fn left_hat(&self, fam: &KernelFamily, kind: KernelKind, g: &SpaceGrid) -> Mat {
        let n = g.n;
        let mut m = Mat::zeros(n);
        let xs = g.points();
        let tau = fam.tau;
        let band = self.band(tau, g);
        for i in 0..n {
            let x = xs[i];
            let center = match kind {
                KernelKind::Q0 => x,
                _ => x + self.model.drift(x) * tau,
            };
            let lo = i.saturating_sub(band + 1);
            let hi = (i + band + 1).min(n - 1);
            for j in 0..n {
                if j < lo || j > hi {
                    let w = if j == 0 || j == n - 1 { 0.5 * g.h } else { g.h };
                    m.set(i, j, w * self.eval(fam, kind, x, xs[j]));
                }
            }
            for c in lo..hi {
                let (a, b) = (xs[c], xs[c + 1]);
                let (mut wl, mut wr) = (0.0, 0.0);
                self.cell_rule(a, b, center, tau, |z, w| {
                    let v = w * self.eval(fam, kind, x, z);
                    wl += v * (b - z) / g.h;
                    wr += v * (z - a) / g.h;
                });
                m.add_at(i, c, wl);
                m.add_at(i, c + 1, wr);
            }
            // outer halves of the two edge hats
            if lo > 0 {
                m.add_at(i, lo, 0.5 * g.h * self.eval(fam, kind, x, xs[lo]));
            }
            if hi < n - 1 {
                m.add_at(i, hi, 0.5 * g.h * self.eval(fam, kind, x, xs[hi]));
            }
        }
        m
    }

    /// M_kl = ∫ φ_k(z) q₀(τ, z, y_l) dz (integration in the first variable).
    pub fn right_hat(&self, fam: &KernelFamily, g: &SpaceGrid) -> Mat {
        let n = g.n;
        let mut m = Mat::zeros(n);
        let xs = g.points();
        let tau = fam.tau;
        let band = self.band(tau, g);
        for l in 0..n {
            let y = xs[l];
            let center = y - self.model.drift(y) * tau;
            let lo = l.saturating_sub(band + 1);
            let hi = (l + band + 1).min(n - 1);
            for k in 0..n {
                if k < lo || k > hi {
                    let w = if k == 0 || k == n - 1 { 0.5 * g.h } else { g.h };
                    m.set(k, l, w * self.eval(fam, KernelKind::Q0, xs[k], y));
                }
            }
            for c in lo..hi {
                let (a, b) = (xs[c], xs[c + 1]);
                let (mut wl, mut wr) = (0.0, 0.0);
                self.cell_rule(a, b, center, tau, |z, w| {
                    let v = w * self.eval(fam, KernelKind::Q0, z, y);
                    wl += v * (b - z) / g.h;
                    wr += v * (z - a) / g.h;
                });
                m.add_at(c, l, wl);
                m.add_at(c + 1, l, wr);
            }
            if lo > 0 {
                m.add_at(lo, l, 0.5 * g.h * self.eval(fam, KernelKind::Q0, xs[lo], y));
            }
            if hi < n - 1 {
                m.add_at(hi, l, 0.5 * g.h * self.eval(fam, KernelKind::Q0, xs[hi], y));
            }
        }
        m
    }

    /// Gauss panels on [a,b] graded toward `center` down to scale τ/4.
    pub fn cell_rule(&self, a: f64, b: f64, center: f64, tau: f64, mut f: impl FnMut(f64, f64)) {
        let mut pts = vec![a, b];
        let c = center.clamp(a, b);
        if c > a && c < b {
            pts.push(c);
        }
        let dist = (center - c).abs();
        let floor = (0.25 * tau).max(dist).max((b - a) * 1e-4);
        let mut d = (b - a) * 0.5;
        while d > floor {
            for p in [c - d, c + d] {
                if p > a && p < b {
                    pts.push(p);
                }
            }
            d *= 0.5;
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        let (gx, gw) = &self.gl;
        for s in pts.windows(2) {
            let (mid, r) = (0.5 * (s[0] + s[1]), 0.5 * (s[1] - s[0]));
            for (x, w) in gx.iter().zip(gw) {
                f(mid + r * x, r * w);
            }
        }
    }
}
