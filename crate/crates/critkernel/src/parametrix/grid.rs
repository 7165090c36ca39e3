//! Space lattice, geometric time nodes, and product-integration weights.

use crate::quad::{bary_weights, gauss_legendre, gauss_lobatto, lagrange_basis};
use serde::{Deserialize, Serialize};

/// Uniform lattice x_j = −L + jh, j = 0..n.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub half_width: f64,
    pub h: f64,
    pub n: usize,
}

impl SpaceGrid {
    pub fn new(half_width: f64, h: f64) -> Self {
        let n = (2.0 * half_width / h).round() as usize + 1;
        Self { half_width, h, n }
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.h
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Nearest lattice index.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let u = ((x + self.half_width) / self.h).round();
        (u >= 0.0 && (u as usize) < self.n).then_some(u as usize)
    }

    /// Hat-function weights of x: (left index, weight of left, weight of right).
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let u = (x + self.half_width) / self.h;
        if u < 0.0 || u > (self.n - 1) as f64 {
            return None;
        }
        let i = (u.floor() as usize).min(self.n - 2);
        Some((i, u - i as f64))
    }

    pub fn refined(&self) -> Self {
        Self::new(self.half_width, 0.5 * self.h)
    }
}

/// Octave panels [T2^{−m−1}, T2^{−m}], m < panels, with Gauss–Lobatto nodes in log t.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimeGrid {
    pub horizon: f64,
    pub panels: usize,
    pub per_panel: usize,
    /// Ascending node times.
    pub nodes: Vec<f64>,
    #[serde(skip)]
    ref_nodes: Vec<f64>,
    #[serde(skip)]
    ref_bw: Vec<f64>,
}

impl TimeGrid {
    pub fn new(horizon: f64, panels: usize, per_panel: usize) -> Self {
        let lob = gauss_lobatto(per_panel);
        // reference nodes in u = log2(t/t_lo) ∈ [0,1]
        let ref_nodes: Vec<f64> = lob.iter().map(|v| 0.5 * (v + 1.0)).collect();
        let ref_bw = bary_weights(&ref_nodes);
        let mut nodes = Vec::new();
        for m in (0..panels).rev() {
            let lo = horizon * 0.5f64.powi(m as i32 + 1);
            for (k, u) in ref_nodes.iter().enumerate() {
                if k == 0 && !nodes.is_empty() {
                    continue;
                }
                nodes.push(lo * 2f64.powf(*u));
            }
        }
        // make dyadic nodes exact
        for m in 0..=panels {
            let idx = (panels - m) * (per_panel - 1);
            nodes[idx] = horizon * 0.5f64.powi(m as i32);
        }
        Self { horizon, panels, per_panel, nodes, ref_nodes, ref_bw }
    }

    pub fn t_min(&self) -> f64 {
        self.nodes[0]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn ensure_ref(&self) -> (Vec<f64>, Vec<f64>) {
        if self.ref_nodes.is_empty() {
            let lob = gauss_lobatto(self.per_panel);
            let r: Vec<f64> = lob.iter().map(|v| 0.5 * (v + 1.0)).collect();
            let bw = bary_weights(&r);
            (r, bw)
        } else {
            (self.ref_nodes.clone(), self.ref_bw.clone())
        }
    }

    /// Interpolation stencil at t ∈ [t_min, T]: (first node index, Lagrange weights).
    pub fn stencil(&self, t: f64) -> (usize, Vec<f64>) {
        let (r, bw) = self.ensure_ref();
        let t = t.clamp(self.t_min(), self.horizon);
        let depth = (self.horizon / t).log2();
        let m = (depth.floor() as usize).min(self.panels - 1);
        let lo = self.horizon * 0.5f64.powi(m as i32 + 1);
        let u = (t / lo).log2().clamp(0.0, 1.0);
        let mut w = vec![0.0; self.per_panel];
        lagrange_basis(&r, &bw, u, &mut w);
        let first = (self.panels - 1 - m) * (self.per_panel - 1);
        (first, w)
    }

    /// Value of the k-th basis function at t, with extension below t_min
    /// by (t/t_min)^`ext` on the first node.
    pub fn basis(&self, k: usize, t: f64, ext: i32) -> f64 {
        if t < self.t_min() {
            return if k == 0 { (t / self.t_min()).powi(ext) } else { 0.0 };
        }
        let (first, w) = self.stencil(t);
        if k >= first && k < first + self.per_panel {
            w[k - first]
        } else {
            0.0
        }
    }

    /// Breakpoints of the piecewise basis inside (a, b).
    fn breaks(&self, a: f64, b: f64) -> Vec<f64> {
        let mut v = vec![a];
        for m in 0..=self.panels {
            let e = self.horizon * 0.5f64.powi(m as i32);
            if e > a && e < b {
                v.push(e);
            }
        }
        v.push(b);
        v.sort_by(f64::total_cmp);
        v
    }

    /// W[k][m] = ∫_a^b ℓ_k(t−s) ℓ_m(s) ds with extensions (ext_left for ℓ_k, ext_right for ℓ_m).
    pub fn product_weights(&self, t: f64, a: f64, b: f64, ext_left: i32, ext_right: i32) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut w = vec![vec![0.0; n]; n];
        if b <= a {
            return w;
        }
        let mut pts = self.breaks(a, b);
        // breakpoints of ℓ_k(t − s) in s
        for s in self.breaks((t - b).max(0.0), t - a) {
            let s = t - s;
            if s > a && s < b {
                pts.push(s);
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
        let gl = gauss_legendre(10);
        for seg in pts.windows(2) {
            let (lo, hi) = (seg[0], seg[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            // grade toward whichever end sits at a singular-looking point (0 in either factor)
            let sub = graded_segments(lo, hi, t);
            for (p, q) in sub {
                let (c, r) = (0.5 * (p + q), 0.5 * (q - p));
                for (x, wt) in gl.0.iter().zip(&gl.1) {
                    let s = c + r * x;
                    let lk = self.basis_all(t - s, ext_left);
                    let lm = self.basis_all(s, ext_right);
                    for &(k, vk) in &lk {
                        for &(m, vm) in &lm {
                            w[k][m] += r * wt * vk * vm;
                        }
                    }
                }
            }
        }
        w
    }

    fn basis_all(&self, t: f64, ext: i32) -> Vec<(usize, f64)> {
        if t < self.t_min() {
            return vec![(0, (t.max(0.0) / self.t_min()).powi(ext))];
        }
        let (first, w) = self.stencil(t);
        w.into_iter().enumerate().map(|(j, v)| (first + j, v)).collect()
    }
}

/// Split [lo,hi] geometrically toward 0 and toward t (log-scale basis functions).
fn graded_segments(lo: f64, hi: f64, t: f64) -> Vec<(f64, f64)> {
    let mut pts = vec![lo, hi];
    let mut add = |anchor: f64, dir: f64| {
        let mut d = (hi - lo) * 0.5;
        while d > (hi - lo) * 1e-6 {
            let p = anchor + dir * d;
            if p > lo && p < hi {
                pts.push(p);
            }
            d *= 0.5;
        }
    };
    if lo < 1e-14 + 0.5 * (hi - lo) {
        add(0.0, 1.0);
    }
    if t - hi < 0.5 * (hi - lo) {
        add(t, -1.0);
    }
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|x, y| (*x - *y).abs() < 1e-16);
    pts.windows(2).map(|w| (w[0], w[1])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nodes_are_geometric_and_dyadic() {
        let g = TimeGrid::new(1.0, 4, 5);
        assert_eq!(g.len(), 17);
        assert_eq!(g.nodes[16], 1.0);
        assert_eq!(g.nodes[12], 0.5);
        assert_eq!(g.nodes[0], 1.0 / 16.0);
        assert!(g.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn basis_reproduces_log_polynomials() {
        let g = TimeGrid::new(1.0, 4, 5);
        let f = |t: f64| t.ln().powi(3) + 2.0 * t.ln();
        for &t in &[0.07, 0.2, 0.33, 0.9] {
            let v: f64 = (0..g.len()).map(|k| g.basis(k, t, 0) * f(g.nodes[k])).sum();
            assert!((v - f(t)).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn product_weights_integrate_constants() {
        let g = TimeGrid::new(1.0, 5, 5);
        let t = 0.7;
        let w = g.product_weights(t, 0.0, t, 0, 0);
        let total: f64 = w.iter().flatten().sum();
        assert!((total - t).abs() < 1e-10, "{total}");
    }
}
