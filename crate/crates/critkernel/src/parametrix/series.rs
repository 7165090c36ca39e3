//! Picard series q = Σ q_n on the space-time lattice.

use super::grid::{SpaceGrid, TimeGrid};
use super::kernels::{FrozenKernels, KernelKind};
use super::model::ModelSpec;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ParametrixConfig {
    pub horizon: f64,
    /// Octave panels below the horizon; t_min = horizon·2^{-panels}.
    pub panels: usize,
    pub per_panel: usize,
    pub half_width: f64,
    pub h: f64,
    pub max_order: usize,
    /// Series stops once the tail bound drops below this fraction of the leading term.
    pub tail_rel: f64,
    /// Declared quadrature tolerance (relative).
    pub quad_tol: f64,
}

impl Default for ParametrixConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            panels: 7,
            per_panel: 5,
            half_width: 8.0,
            h: 1.0 / 16.0,
            max_order: 20,
            tail_rel: 1e-3,
            quad_tol: 5e-3,
        }
    }
}

impl ParametrixConfig {
    /// One uniform refinement: half the mesh width, one extra octave.
    pub fn refined(&self) -> Self {
        Self { h: self.h * 0.5, panels: self.panels + 1, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::Config { field: field.into(), msg: msg.into() });
        if !(self.horizon > 0.0) {
            return bad("horizon", "must be positive");
        }
        if self.panels == 0 || self.per_panel < 2 {
            return bad("panels", "need at least one panel with two nodes");
        }
        if !(self.h > 0.0 && self.half_width > 4.0 * self.h) {
            return bad("h", "mesh must be positive and much smaller than the half width");
        }
        if !(self.tail_rel > 0.0) || !(self.quad_tol > 0.0) {
            return bad("tolerance", "must be positive");
        }
        Ok(())
    }
}

/// Lattice matrices of the frozen kernels at one time node.
pub struct NodeMats {
    /// ∫ q₀(τ,x_i,z) φ_j(z) dz
    pub a: Mat,
    /// ∫ φ_k(z) q₀(τ,z,y_l) dz
    pub b: Mat,
    /// q₀(τ,x_i,y_j)
    pub q0: Mat,
    /// ∫ p₀(τ,x_i,z) φ_j(z) dz
    pub ap: Mat,
    pub p0: Mat,
    /// ∫ ∂ₓp₀(τ,x_i,z) φ_j(z) dz
    pub apd: Mat,
    pub dp0: Mat,
}

/// Product-integration weights for one target time.
pub struct NodeWeights {
    /// ∫₀ᵗ, left factor constant below t_min, right factor linear
    pub full: Vec<Vec<f64>>,
    /// s ∈ [t/2, t]
    pub right: Vec<Vec<f64>>,
    /// s ∈ [0, t/2], left factor linear, right factor constant
    pub left: Vec<Vec<f64>>,
}

pub struct Lattice {
    pub config: ParametrixConfig,
    pub space: SpaceGrid,
    pub time: TimeGrid,
    pub kernels: Arc<FrozenKernels>,
    pub mats: Vec<NodeMats>,
    pub weights: Vec<NodeWeights>,
}

impl Lattice {
    pub fn build(model: &ModelSpec, config: &ParametrixConfig) -> Result<Self> {
        model.validate()?;
        config.validate()?;
        let space = SpaceGrid::new(config.half_width, config.h);
        let time = TimeGrid::new(config.horizon, config.panels, config.per_panel);
        let kernels = Arc::new(FrozenKernels::new(model));
        let mut mats = Vec::with_capacity(time.len());
        let constant = model.is_constant_coefficient();
        for &t in &time.nodes {
            let fam = kernels.family_uncached(t);
            let (a, b, q0) = if constant {
                (Mat::zeros(space.n), Mat::zeros(space.n), Mat::zeros(space.n))
            } else {
                (
                    kernels.left_hat(&fam, KernelKind::Q0, &space),
                    kernels.right_hat(&fam, &space),
                    kernels.point_matrix(&fam, KernelKind::Q0, &space),
                )
            };
            mats.push(NodeMats {
                a,
                b,
                q0,
                ap: kernels.left_hat(&fam, KernelKind::P0, &space),
                p0: kernels.point_matrix(&fam, KernelKind::P0, &space),
                apd: kernels.left_hat(&fam, KernelKind::DP0, &space),
                dp0: kernels.point_matrix(&fam, KernelKind::DP0, &space),
            });
        }
        let weights = time
            .nodes
            .iter()
            .map(|&t| NodeWeights {
                full: time.product_weights(t, 0.0, t, 0, 1),
                right: time.product_weights(t, 0.5 * t, t, 0, 1),
                left: time.product_weights(t, 0.0, 0.5 * t, 1, 0),
            })
            .collect();
        Ok(Self { config: config.clone(), space, time, kernels, mats, weights })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.kernels.model
    }

    /// Σ_k L_k (Σ_m W[k][m] R_m)
    pub fn convolve<'a>(
        &self,
        w: &[Vec<f64>],
        left: impl Fn(usize) -> &'a Mat,
        right: impl Fn(usize) -> &'a Mat,
    ) -> Mat {
        let n = self.space.n;
        let mut out = Mat::zeros(n);
        for (k, row) in w.iter().enumerate() {
            if row.iter().all(|v| *v == 0.0) {
                continue;
            }
            let s = Mat::combine(n, row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(m, v)| (*v, right(m))));
            out.gemm_acc(left(k), &s);
        }
        out
    }

    /// q₁ from the split quadrature: hat-integrated factor on the singular half.
    pub fn first_iterate(&self) -> Vec<Mat> {
        (0..self.time.len())
            .map(|i| {
                let w = &self.weights[i];
                let mut m = self.convolve(&w.right, |k| &self.mats[k].a, |m| &self.mats[m].q0);
                let l = self.convolve(&w.left, |k| &self.mats[k].q0, |m| &self.mats[m].b);
                m.axpy(1.0, &l);
                m
            })
            .collect()
    }

    /// One Picard step for n ≥ 2.
    pub fn picard_step(&self, prev: &[Mat]) -> Vec<Mat> {
        (0..self.time.len())
            .map(|i| self.convolve(&self.weights[i].full, |k| &self.mats[k].a, |m| &prev[m]))
            .collect()
    }
}

/// Lemma-type majorant shape ϱ⁰_{(n+1)β} + ϱ^β_{nβ} in d = 1.
pub fn majorant(n: usize, beta: f64, t: f64, x: f64) -> f64 {
    let r = x.abs();
    let env = (r + t).powi(-2);
    t.powf((n + 1) as f64 * beta) * env + t.powf(n as f64 * beta) * r.powf(beta).min(1.0) * env
}

/// Γ-ratio coefficient (C Γ(β))^{n+1}/Γ((n+1)β).
pub fn gamma_coeff(c_d: f64, beta: f64, n: usize) -> f64 {
    let k = (n + 1) as f64;
    (k * (c_d * gamma(beta)).ln() - ln_gamma(k * beta)).exp()
}

/// Σ_{n>order} of the Γ-ratio coefficients; summed past the peak of the terms.
pub fn tail_bound(c_d: f64, beta: f64, order: usize) -> f64 {
    let mut s = 0.0;
    let mut prev = 0.0;
    for n in order + 1..order + 1_000_000 {
        let term = gamma_coeff(c_d, beta, n);
        if !term.is_finite() {
            return f64::INFINITY;
        }
        s += term;
        if term < prev && term <= 1e-17 * s {
            break;
        }
        prev = term;
    }
    s
}

/// C_d implied by a level-n ratio: γ_n = (C Γ(β))^{n+1}/Γ((n+1)β).
pub fn c_from_ratio(ratio: f64, beta: f64, n: usize) -> f64 {
    let k = (n + 1) as f64;
    ((ratio.ln() + ln_gamma(k * beta)) / k).exp() / gamma(beta)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelStats {
    pub n: usize,
    pub sup: f64,
    /// max |q_n| / majorant over the interior
    pub ratio: f64,
    pub c_implied: f64,
}

pub struct ParametrixState {
    pub lattice: Arc<Lattice>,
    pub order: usize,
    /// q_n at the time nodes, n = 0..=order
    pub q_tables: Vec<Vec<Mat>>,
    /// Σ_{n≥1} q_n
    pub r_sum: Vec<Mat>,
    pub stats: Vec<LevelStats>,
    pub c_d: f64,
    pub tail_bound: f64,
    pub leading: f64,
}

impl ParametrixState {
    pub fn model(&self) -> &ModelSpec {
        self.lattice.model()
    }

    /// q = q₀ + r at node i.
    pub fn q_total(&self, i: usize) -> Mat {
        let mut m = self.q_tables[0][i].clone();
        m.axpy(1.0, &self.r_sum[i]);
        m
    }
}

fn level_stats(lat: &Lattice, n: usize, tab: &[Mat]) -> LevelStats {
    let beta = lat.model().beta;
    let g = &lat.space;
    let lim = 0.5 * g.half_width;
    let mut sup = 0.0f64;
    let mut ratio = 0.0f64;
    for (i, m) in tab.iter().enumerate() {
        let t = lat.time.nodes[i];
        for a in 0..g.n {
            let x = g.x(a);
            if x.abs() > lim {
                continue;
            }
            for b in 0..g.n {
                let y = g.x(b);
                if y.abs() > lim {
                    continue;
                }
                let v = m.get(a, b).abs();
                sup = sup.max(v);
                ratio = ratio.max(v / majorant(n, beta, t, x - y));
            }
        }
    }
    let c_implied = if ratio > 0.0 { c_from_ratio(ratio, beta, n) } else { 0.0 };
    LevelStats { n, sup, ratio, c_implied }
}

/// Sum the Picard series until the Γ-ratio tail is below `tail_rel` of the leading term.
pub fn sum_series_on(lattice: Arc<Lattice>, tail_rel: f64) -> Result<ParametrixState> {
    if !(tail_rel > 0.0) {
        return Err(Error::Config { field: "tail_rel".into(), msg: "must be positive".into() });
    }
    let lat = &*lattice;
    let nt = lat.time.len();
    let n = lat.space.n;
    let beta = lat.model().beta;
    let cap = lat.config.max_order;
    let q0: Vec<Mat> = lat.mats.iter().map(|m| m.q0.clone()).collect();
    let zero = || (0..nt).map(|_| Mat::zeros(n)).collect::<Vec<_>>();
    if lat.model().is_constant_coefficient() {
        return Ok(ParametrixState {
            q_tables: vec![q0],
            r_sum: zero(),
            stats: vec![LevelStats { n: 0, sup: 0.0, ratio: 0.0, c_implied: 0.0 }],
            c_d: 0.0,
            tail_bound: 0.0,
            leading: 0.0,
            order: 0,
            lattice,
        });
    }
    let mut stats = vec![level_stats(lat, 0, &q0)];
    let mut c_d = stats[0].c_implied;
    let mut tables = vec![q0];
    let mut r_sum = zero();
    let mut order = 0;
    loop {
        let tail = tail_bound(c_d, beta, order);
        if tail < tail_rel * c_d {
            break;
        }
        if order >= cap {
            return Err(Error::ConvergenceTooSlow { cap, c_d });
        }
        let next = if order == 0 { lat.first_iterate() } else { lat.picard_step(&tables[order]) };
        let st = level_stats(lat, order + 1, &next);
        c_d = c_d.max(st.c_implied);
        stats.push(st);
        for (acc, m) in r_sum.iter_mut().zip(&next) {
            acc.axpy(1.0, m);
        }
        tables.push(next);
        order += 1;
    }
    let tail = tail_bound(c_d, beta, order);
    Ok(ParametrixState { lattice, order, q_tables: tables, r_sum, stats, c_d, tail_bound: tail, leading: c_d })
}

pub fn sum_series(model: &ModelSpec, config: &ParametrixConfig) -> Result<ParametrixState> {
    let lat = Arc::new(Lattice::build(model, config)?);
    sum_series_on(lat, config.tail_rel)
}
