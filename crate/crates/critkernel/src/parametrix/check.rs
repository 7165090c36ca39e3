//! Independent re-quadrature of the fixed-point equation
//! q = q₀ + ∫₀ᵗ∫ q₀(t−s,x,z) q(s,z,y) dz ds.

use super::kernels::KernelKind;
use super::series::ParametrixState;
use crate::linalg::Mat;
use crate::quad::gauss_legendre;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Probe {
    pub t_index: usize,
    pub x_index: usize,
    pub y_index: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub table: f64,
    pub requad: f64,
    /// |table − requad| / sup_x |q(t,·,y)|
    pub rel_residual: f64,
}

/// Random interior lattice probes at the node times closest to `times`.
pub fn random_probes(state: &ParametrixState, times: &[f64], count: usize, seed: u64) -> Vec<Probe> {
    let lat = &state.lattice;
    let g = &lat.space;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = (0.5 * g.half_width / g.h) as i64;
    let mid = (g.n / 2) as i64;
    let idx: Vec<usize> = times
        .iter()
        .map(|&t| {
            (0..lat.time.len())
                .min_by(|&a, &b| (lat.time.nodes[a] - t).abs().total_cmp(&(lat.time.nodes[b] - t).abs()))
                .unwrap()
        })
        .collect();
    (0..count)
        .map(|k| Probe {
            t_index: idx[k % idx.len()],
            x_index: (mid + rng.random_range(-lim..=lim)) as usize,
            y_index: (mid + rng.random_range(-lim..=lim)) as usize,
        })
        .collect()
}

/// Column y of Σ_k ℓ_k(s) T_k, linear below t_min.
pub fn interp_column(state: &ParametrixState, tabs: &[Mat], s: f64, col: usize) -> Vec<f64> {
    let lat = &state.lattice;
    let n = lat.space.n;
    let mut out = vec![0.0; n];
    for (k, m) in tabs.iter().enumerate() {
        let w = lat.time.basis(k, s, 1);
        if w != 0.0 {
            for (i, o) in out.iter_mut().enumerate() {
                *o += w * m.get(i, col);
            }
        }
    }
    out
}

fn time_rule(t: f64, eps: f64) -> Vec<(f64, f64)> {
    let gl = gauss_legendre(8);
    let mut out = Vec::new();
    let mut edges = vec![eps];
    let mut e = 0.5 * t;
    let mut lows = Vec::new();
    while e > eps * 1.0001 {
        lows.push(e);
        e *= 0.5;
    }
    lows.reverse();
    edges.extend(lows);
    let mirrored: Vec<f64> = edges.iter().rev().skip(1).map(|v| t - v).collect();
    edges.extend(mirrored);
    for w in edges.windows(2) {
        let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in gl.0.iter().zip(&gl.1) {
            out.push((c + r * x, r * wt));
        }
    }
    // end cells [0,ε] and [t−ε,t] by constant extension
    out.push((eps, eps));
    out.push((t - eps, eps));
    out
}

fn space_breaks(lo: f64, hi: f64, h: f64, centers: &[(f64, f64)]) -> Vec<f64> {
    let n = ((hi - lo) / h).round() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|j| lo + j as f64 * h).collect();
    for &(c, scale) in centers {
        if c <= lo || c >= hi {
            continue;
        }
        pts.push(c);
        let mut d = h;
        while d > scale {
            pts.push(c - d);
            pts.push(c + d);
            d *= 0.5;
        }
    }
    pts.retain(|p| *p >= lo && *p <= hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    pts
}

/// Re-evaluate r = Σ_{n≥1} q_n at the probes by direct quadrature and compare with the table.
pub fn fixed_point_check(state: &ParametrixState, probes: &[Probe]) -> Vec<FixedPointReport> {
    let lat = &state.lattice;
    let g = &lat.space;
    let model = lat.model();
    let ker = &lat.kernels;
    let eps = 0.25 * lat.time.t_min();
    let gl = gauss_legendre(6);
    let mut acc = vec![0.0; probes.len()];
    let mut t_ids: Vec<usize> = probes.iter().map(|p| p.t_index).collect();
    t_ids.sort();
    t_ids.dedup();
    for &ti in &t_ids {
        let t = lat.time.nodes[ti];
        for (s, ws) in time_rule(t, eps) {
            let tau = t - s;
            let fam_tau = ker.family_uncached(tau);
            let fam_s = ker.family_uncached(s);
            for (pi, p) in probes.iter().enumerate() {
                if p.t_index != ti {
                    continue;
                }
                let (x, y) = (g.x(p.x_index), g.x(p.y_index));
                let rcol = interp_column(state, &state.r_sum, s, p.y_index);
                let centers = [
                    (x, 0.125 * tau),
                    (x + model.drift(x) * tau, 0.125 * tau),
                    (y, 0.125 * s),
                    (y - model.drift(y) * s, 0.125 * s),
                ];
                let pts = space_breaks(-g.half_width, g.half_width, g.h, &centers);
                let mut inner = 0.0;
                for w in pts.windows(2) {
                    let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
                    for (u, wt) in gl.0.iter().zip(&gl.1) {
                        let z = c + r * u;
                        let rz = match g.locate(z) {
                            Some((i, f)) => (1.0 - f) * rcol[i] + f * rcol[(i + 1).min(g.n - 1)],
                            None => 0.0,
                        };
                        let left = ker.eval(&fam_tau, KernelKind::Q0, x, z);
                        let right = ker.eval(&fam_s, KernelKind::Q0, z, y) + rz;
                        inner += r * wt * left * right;
                    }
                }
                acc[pi] += ws * inner;
            }
        }
    }
    probes
        .iter()
        .zip(acc)
        .map(|(p, requad)| {
            let q = state.q_total(p.t_index);
            let sup = (0..g.n).map(|i| q.get(i, p.y_index).abs()).fold(0.0, f64::max);
            let table = state.r_sum[p.t_index].get(p.x_index, p.y_index);
            FixedPointReport {
                t: lat.time.nodes[p.t_index],
                x: g.x(p.x_index),
                y: g.x(p.y_index),
                table,
                requad,
                rel_residual: (table - requad).abs() / sup.max(1e-300),
            }
        })
        .collect()
}
