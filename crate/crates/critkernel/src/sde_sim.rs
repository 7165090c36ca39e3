//! Monte Carlo for dX = b(X)dt + ∫ 1_{[0,σ(X_{t−},z)]}(r) z Ñ(dz×dr×dt) in d = 1.
//!
//! Marks with |z| < ε are dropped. Events on ε ≤ |z| ≤ 1 and |z| > 1 come from one
//! marked Poisson stream; a mark is accepted iff its level r ≤ σ(X_{s−}, z).

use crate::base_kernels::family::Profile;
use crate::base_kernels::{apply_nonlocal, NonlocalQuad};
use crate::error::{Error, Result};
use crate::parametrix::{KernelTable, ModelSpec, ScalarFn};
use crate::quad::{gauss_legendre, Rule};
use crate::resolvent::{TransformedCoeffs, ZvonkinMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::sync::Arc;

/// ν(dz) = κ̄(z)|z|^{−2}dz with the small-jump floor ε and sup σ.
#[derive(Clone)]
pub struct LevyNoiseSpec {
    pub kbar: Profile,
    pub kbar0: f64,
    pub kbar1: f64,
    pub eps: f64,
    pub sigma_max: f64,
}

impl std::fmt::Debug for LevyNoiseSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LevyNoiseSpec")
            .field("kbar0", &self.kbar0)
            .field("kbar1", &self.kbar1)
            .field("eps", &self.eps)
            .field("sigma_max", &self.sigma_max)
            .finish()
    }
}

impl LevyNoiseSpec {
    /// κ̄ ≡ 1.
    pub fn cauchy(eps: f64, sigma_max: f64) -> Self {
        Self { kbar: Profile::constant(1.0), kbar0: 1.0, kbar1: 1.0, eps, sigma_max }
    }

    /// κ̄ ≡ 1 and σ = κ(x,z), so the generator is 𝓛^κ + b·∇ of the model.
    pub fn for_model(model: &ModelSpec, eps: f64) -> Self {
        Self::cauchy(eps, model.kappa1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidSpec(format!("small-jump floor eps = {} must lie in (0,1)", self.eps)));
        }
        if !(self.sigma_max > 0.0) || !(self.kbar0 > 0.0 && self.kbar0 <= self.kbar1) {
            return Err(Error::InvalidSpec("need sigma_max > 0 and 0 < kbar0 <= kbar1".into()));
        }
        for k in 0..60 {
            let r = 1e-4 * 1.3f64.powi(k);
            let v = (self.kbar.g)(r);
            if v < self.kbar0 - 1e-12 || v > self.kbar1 + 1e-12 {
                return Err(Error::InvalidSpec(format!("kbar({r}) = {v} outside [kbar0, kbar1]")));
            }
        }
        Ok(())
    }

    pub fn kbar(&self, z: f64) -> f64 {
        (self.kbar.g)(z.abs())
    }

    /// σ(x,z) = κ(x,z)/κ̄(z).
    pub fn sigma(&self, model: &ModelSpec, x: f64, z: f64) -> f64 {
        model.kappa(x, z) / self.kbar(z)
    }

    /// ν({lo ≤ |z| ≤ hi}).
    pub fn band_mass(&self, lo: f64, hi: f64) -> f64 {
        if self.kbar.is_constant() {
            let inv_hi = if hi.is_finite() { 1.0 / hi } else { 0.0 };
            return 2.0 * self.kbar.at_inf * (1.0 / lo - inv_hi);
        }
        // r = 1/u turns ∫ κ̄(r)r^{−2}dr into ∫ κ̄(1/u)du
        let u_lo = if hi.is_finite() { 1.0 / hi } else { 0.0 };
        let rule = Rule::graded_both(u_lo, 1.0 / lo, 30, 10);
        2.0 * rule.integrate(|u| if u > 0.0 { (self.kbar.g)(1.0 / u) } else { self.kbar.at_inf })
    }

    /// Λ_mid = σ_max ν(ε ≤ |z| ≤ 1).
    pub fn mid_intensity(&self) -> f64 {
        self.sigma_max * self.band_mass(self.eps, 1.0)
    }

    /// Λ_big = σ_max ν(|z| > 1).
    pub fn big_intensity(&self) -> f64 {
        self.sigma_max * self.band_mass(1.0, f64::INFINITY)
    }

    /// Mean of the mid-band marks; zero for even κ̄.
    pub fn mid_compensator(&self) -> f64 {
        0.0
    }

    /// σ_max ∫_{|z|<ε}|z|²ν(dz)·T, the variance dropped with the small jumps.
    pub fn truncation_budget(&self, horizon: f64) -> f64 {
        let gl = gauss_legendre(12);
        let (c, r) = (0.5 * self.eps, 0.5 * self.eps);
        let m: f64 = gl.0.iter().zip(&gl.1).map(|(u, w)| r * w * (self.kbar.g)(c + r * u)).sum();
        2.0 * m * self.sigma_max * horizon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseEvent {
    pub t: f64,
    pub z: f64,
    /// Thinning level, uniform on [0, σ_max].
    pub r: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub seed: u64,
    pub stream: u64,
    pub horizon: f64,
    pub sigma_max: f64,
    pub events: Vec<NoiseEvent>,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Events on [0, T] with |z| ≥ ε; `stream` selects an independent substream of `seed`.
pub fn sample_noise(spec: &LevyNoiseSpec, horizon: f64, seed: u64, stream: u64) -> Result<NoiseRealization> {
    spec.validate()?;
    let mut rng = rng_for(seed, stream);
    // proposals from κ̄₁|z|^{−2}, kept with probability κ̄(z)/κ̄₁
    let inv_eps = 1.0 / spec.eps;
    let mid = spec.sigma_max * spec.kbar1 * 2.0 * (inv_eps - 1.0);
    let big = spec.sigma_max * spec.kbar1 * 2.0;
    let total = mid + big;
    let constant = spec.kbar.is_constant();
    let mut events = Vec::new();
    let mut t = 0.0;
    loop {
        t += -(1.0 - rng.random::<f64>()).ln() / total;
        if t > horizon {
            break;
        }
        let u: f64 = rng.random();
        let radius = if rng.random::<f64>() * total < mid {
            // inverse of the band tail ∝ 1/r − 1
            1.0 / (inv_eps - u * (inv_eps - 1.0))
        } else {
            1.0 / (1.0 - u)
        };
        let z = if rng.random::<bool>() { radius } else { -radius };
        if !constant && rng.random::<f64>() * spec.kbar1 > (spec.kbar.g)(radius) {
            continue;
        }
        let r = rng.random::<f64>() * spec.sigma_max;
        events.push(NoiseEvent { t, z, r });
    }
    Ok(NoiseRealization { seed, stream, horizon, sigma_max: spec.sigma_max, events })
}

/// Drift, acceptance level and jump map of an event-driven SDE.
#[derive(Clone)]
pub struct SdeCoeffs {
    pub drift: ScalarFn,
    pub sigma: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    /// Post-jump state; `None` means x + z.
    pub jump: Option<Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>>,
    pub sigma_max: f64,
}

impl SdeCoeffs {
    /// The SDE of a model: drift b, σ = κ/κ̄.
    pub fn from_model(model: &ModelSpec, spec: &LevyNoiseSpec) -> Self {
        let (m, s) = (model.clone(), spec.clone());
        Self {
            drift: model.b.clone(),
            sigma: Arc::new(move |x, z| s.sigma(&m, x, z)),
            jump: None,
            sigma_max: spec.sigma_max,
        }
    }

    /// Constant σ and drift b.
    pub fn constant(b: ScalarFn, sigma: f64) -> Self {
        Self { drift: b, sigma: Arc::new(move |_, _| sigma), jump: None, sigma_max: sigma.max(1e-300) }
    }

    /// The SDE of Y = Φ(X) with jumps g̃ and levels σ̃; drift from [`TransformedCoeffs::y_drift`].
    pub fn zvonkin(tc: Arc<TransformedCoeffs>) -> Self {
        let (a, b, c) = (tc.clone(), tc.clone(), tc.clone());
        Self {
            drift: Arc::new(move |y| a.y_drift(y)),
            sigma: Arc::new(move |y, z| b.sigma_tilde(y, z).unwrap_or(f64::NAN)),
            jump: Some(Arc::new(move |y, z| {
                let x = c.map.inverse(y).unwrap_or(f64::NAN);
                c.map.forward(x + z)
            })),
            sigma_max: tc.noise.sigma_max,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Trajectory {
    /// States at j·Δt, j = 0..=T/Δt.
    pub mesh: Vec<f64>,
    pub final_state: f64,
    pub accepted: usize,
    pub proposed: usize,
}

/// Euler drift on the mesh and at event times; events processed exactly at their times.
pub fn simulate_path(x0: f64, coeffs: &SdeCoeffs, noise: &NoiseRealization, dt: f64, record: bool) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::InvalidSpec(format!("mesh dt = {dt} must be positive")));
    }
    if coeffs.sigma_max > noise.sigma_max * (1.0 + 1e-12) {
        return Err(Error::InvalidSpec("noise levels do not cover sup sigma".into()));
    }
    let horizon = noise.horizon;
    let steps = (horizon / dt).round() as usize;
    let mut out = Trajectory { mesh: Vec::with_capacity(if record { steps + 1 } else { 0 }), ..Default::default() };
    if record {
        out.mesh.push(x0);
    }
    let (mut t, mut x) = (0.0, x0);
    let mut k = 1;
    let mut events = noise.events.iter().peekable();
    loop {
        let tm = if k < steps { k as f64 * dt } else { horizon };
        let te = events.peek().map_or(f64::INFINITY, |e| e.t);
        if te <= tm && te <= horizon {
            let e = events.next().unwrap();
            x += (coeffs.drift)(x) * (e.t - t);
            t = e.t;
            out.proposed += 1;
            let s = (coeffs.sigma)(x, e.z);
            if s > coeffs.sigma_max * (1.0 + 1e-9) {
                return Err(Error::InvalidSpec(format!("sigma({x}, {}) = {s} exceeds sigma_max", e.z)));
            }
            if e.r <= s {
                x = match &coeffs.jump {
                    Some(j) => j(x, e.z),
                    None => x + e.z,
                };
                out.accepted += 1;
            }
            continue;
        }
        x += (coeffs.drift)(x) * (tm - t);
        t = tm;
        if record && k <= steps {
            out.mesh.push(x);
        }
        if k >= steps {
            break;
        }
        k += 1;
    }
    out.final_state = x;
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathEnsemble {
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    /// Path i uses substream i of `seed`.
    pub count: usize,
    pub eps: f64,
    pub model_hash: String,
    pub finals: Vec<f64>,
    /// Mesh records, if requested.
    pub paths: Vec<Vec<f64>>,
    pub integrator: String,
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_ensemble(
    x0: f64,
    coeffs: &SdeCoeffs,
    spec: &LevyNoiseSpec,
    horizon: f64,
    dt: f64,
    count: usize,
    seed: u64,
    record: bool,
) -> Result<PathEnsemble> {
    let mut finals = Vec::with_capacity(count);
    let mut paths = Vec::new();
    for i in 0..count {
        let noise = sample_noise(spec, horizon, seed, i as u64)?;
        let tr = simulate_path(x0, coeffs, &noise, dt, record)?;
        finals.push(tr.final_state);
        if record {
            paths.push(tr.mesh);
        }
    }
    Ok(PathEnsemble {
        x0,
        horizon,
        dt,
        seed,
        count,
        eps: spec.eps,
        model_hash: String::new(),
        finals,
        paths,
        integrator: "event-driven Euler drift, exact marks, thinning at left limits".into(),
    })
}

/// The same, tagged with the model fingerprint for later comparisons.
pub fn simulate_model(model: &ModelSpec, spec: &LevyNoiseSpec, x0: f64, horizon: f64, dt: f64, count: usize, seed: u64) -> Result<PathEnsemble> {
    let c = SdeCoeffs::from_model(model, spec);
    let mut e = simulate_ensemble(x0, &c, spec, horizon, dt, count, seed, false)?;
    e.model_hash = model.hash();
    Ok(e)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub enum Bandwidth {
    /// 1.06·min(sd, IQR/1.34)·n^{−1/5}
    Silverman,
    Fixed(f64),
}

/// Gaussian kernel density estimate on a uniform grid with pointwise standard errors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    pub std_err: Vec<f64>,
    pub bandwidth: f64,
    pub n: usize,
    sorted: Vec<f64>,
}

pub const MIN_PATHS: usize = 10_000;

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let p = q * (sorted.len() - 1) as f64;
    let i = p.floor() as usize;
    let f = p - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - f) + sorted[i + 1] * f
    } else {
        sorted[i]
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn density_estimate(samples: &[f64], xs: &[f64], policy: Bandwidth) -> Result<DensityEstimate> {
    let n = samples.len();
    if n < MIN_PATHS {
        return Err(Error::TooFewPaths { got: n, need: MIN_PATHS });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = match policy {
        Bandwidth::Fixed(h) => h,
        Bandwidth::Silverman => {
            let mean = sorted.iter().sum::<f64>() / n as f64;
            let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            1.06 * sd.min(iqr / 1.34) * (n as f64).powf(-0.2)
        }
    };
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let mut values = Vec::with_capacity(xs.len());
    let mut std_err = Vec::with_capacity(xs.len());
    for &x in xs {
        let lo = sorted.partition_point(|v| *v < x - 8.0 * h);
        let hi = sorted.partition_point(|v| *v <= x + 8.0 * h);
        let (mut s1, mut s2) = (0.0, 0.0);
        for v in &sorted[lo..hi] {
            let u = (x - v) / h;
            let k = norm * (-0.5 * u * u).exp();
            s1 += k;
            s2 += k * k;
        }
        let m1 = s1 / n as f64;
        let m2 = s2 / n as f64;
        values.push(m1);
        std_err.push(((m2 - m1 * m1).max(0.0) / n as f64).sqrt());
    }
    Ok(DensityEstimate { xs: xs.to_vec(), values, std_err, bandwidth: h, n, sorted })
}

impl DensityEstimate {
    /// ∫_lo^hi of the estimate, in closed form.
    pub fn mass_on(&self, lo: f64, hi: f64) -> f64 {
        let h = self.bandwidth;
        self.sorted.iter().map(|v| std_normal_cdf((hi - v) / h) - std_normal_cdf((lo - v) / h)).sum::<f64>() / self.n as f64
    }

    pub fn samples_sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "x,density,std_err")?;
        for ((x, v), e) in self.xs.iter().zip(&self.values).zip(&self.std_err) {
            writeln!(w, "{x:.17e},{v:.17e},{e:.17e}")?;
        }
        Ok(())
    }
}

/// sup_y |F_n(y) − F(y)| for the empirical CDF of `samples`.
pub fn ks_distance(samples: &[f64], cdf: &dyn Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &y)| {
            let f = cdf(y);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DensityComparison {
    pub l1: f64,
    pub ks: f64,
    pub bandwidth: f64,
    /// Mass of p(t,x0,·) on the lattice window.
    pub table_mass: f64,
}

/// L¹ and KS distances between the ensemble at its horizon and the row p(t, x0, ·).
pub fn compare_density(ens: &PathEnsemble, table: &KernelTable, t: f64) -> Result<DensityComparison> {
    if ens.model_hash != table.model_hash {
        return Err(Error::ModelMismatch(format!("ensemble {} vs table {}", ens.model_hash, table.model_hash)));
    }
    if (ens.horizon - t).abs() > 1e-12 {
        return Err(Error::Domain(format!("ensemble horizon {} differs from t = {t}", ens.horizon)));
    }
    let half = table.lattice.space.half_width;
    let m = 1024;
    let dy = 2.0 * half / m as f64;
    let ys: Vec<f64> = (0..=m).map(|j| -half + j as f64 * dy).collect();
    let p: Vec<f64> = ys.iter().map(|&y| table.p(t, ens.x0, y)).collect::<Result<_>>()?;
    let kde = density_estimate(&ens.finals, &ys, Bandwidth::Silverman)?;
    let trap = |v: &[f64]| dy * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]));
    let diff: Vec<f64> = p.iter().zip(&kde.values).map(|(a, b)| (a - b).abs()).collect();
    let table_mass = trap(&p);
    let inside = kde.mass_on(-half, half);
    let l1 = trap(&diff) + ((1.0 - table_mass) - (1.0 - inside)).abs();
    // table CDF: the mass outside the window split evenly between the two tails
    let mut cdf = Vec::with_capacity(ys.len());
    let mut acc = 0.5 * (1.0 - table_mass);
    cdf.push(acc);
    for j in 1..ys.len() {
        acc += 0.5 * dy * (p[j - 1] + p[j]);
        cdf.push(acc);
    }
    let lo_tail = 0.5 * (1.0 - table_mass);
    let cdf_at = |y: f64| {
        if y <= -half {
            lo_tail * (half / y.abs()).min(1.0)
        } else if y >= half {
            1.0 - lo_tail * (half / y).min(1.0)
        } else {
            let u = (y + half) / dy;
            let j = (u.floor() as usize).min(m - 1);
            let f = u - j as f64;
            cdf[j] * (1.0 - f) + cdf[j + 1] * f
        }
    };
    let ks = ks_distance(&ens.finals, &cdf_at);
    Ok(DensityComparison { l1, ks, bandwidth: kde.bandwidth, table_mass })
}

/// Nonnegative weight with its declared integrability class and singular points.
#[derive(Clone)]
pub struct KatoFunction {
    pub h: ScalarFn,
    pub class: KatoClass,
    /// Points where h jumps or blows up.
    pub breaks: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum KatoClass {
    Bounded,
    Lp(f64),
    Explicit,
}

impl KatoFunction {
    pub fn constant(c: f64) -> Self {
        Self { h: Arc::new(move |_| c), class: KatoClass::Bounded, breaks: vec![] }
    }

    /// |x|^{−1/(2p)} on |x| ≤ 1, in L^p.
    pub fn lp_example(p: f64) -> Self {
        Self {
            h: Arc::new(move |x: f64| if x.abs() <= 1.0 && x != 0.0 { x.abs().powf(-0.5 / p) } else { 0.0 }),
            class: KatoClass::Lp(p),
            breaks: vec![-1.0, 0.0, 1.0],
        }
    }
}

/// K¹(T) = sup over probe x of ∫ |h(x−y)| (1 ∧ T²|y|^{−2}) dy (d = 1).
pub fn kato_norm(h: &KatoFunction, horizon: f64, probes: &[f64]) -> f64 {
    let t = horizon;
    let mut worst = 0.0f64;
    for &x in probes {
        // breaks in y where h(x − y) is singular
        let pts: Vec<f64> = h.breaks.iter().map(|s| x - s).collect();
        // near part: |y| ≤ T
        let mut near = vec![-t, t];
        near.extend(pts.iter().copied().filter(|y| y.abs() < t));
        near.sort_by(f64::total_cmp);
        let f = |y: f64| h.h.as_ref()(x - y).abs();
        let mut s = 0.0;
        for w in near.windows(2) {
            if w[1] > w[0] {
                s += Rule::graded_both(w[0], w[1], 40, 10).integrate(f);
            }
        }
        // far part: y = ±T/u, u ∈ (0,1], weight T
        for sign in [1.0, -1.0] {
            let mut us: Vec<f64> = vec![0.0, 1.0];
            us.extend(pts.iter().filter(|y| sign * **y > t).map(|y| t / (sign * y)));
            us.sort_by(f64::total_cmp);
            for w in us.windows(2) {
                if w[1] > w[0] {
                    s += Rule::graded_both(w[0], w[1], 40, 10).integrate(|u| if u > 0.0 { t * f(sign * t / u) } else { 0.0 });
                }
            }
        }
        if !s.is_finite() {
            return f64::INFINITY;
        }
        worst = worst.max(s);
    }
    worst
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct KrylovReport {
    pub mc: f64,
    pub std_err: f64,
    pub kernel_side: f64,
}

/// MC mean of ∫₀^T f(X_s)ds by the trapezoid rule on the recorded mesh.
pub fn krylov_functional(ens: &PathEnsemble, f: &dyn Fn(f64) -> f64) -> Result<(f64, f64)> {
    if ens.paths.is_empty() {
        return Err(Error::Dependency { module: "sde_sim", what: "ensemble without mesh records".into() });
    }
    let dt = ens.dt;
    let vals: Vec<f64> = ens
        .paths
        .iter()
        .map(|p| {
            let n = p.len();
            let ends = 0.5 * (f(p[0]) + f(p[n - 1]));
            dt * (p[1..n - 1].iter().map(|&x| f(x)).sum::<f64>() + ends)
        })
        .collect();
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// ∫₀^T 𝒯_s f(x0) ds from the kernel table; below t_min, 𝒯_s f(x0) ≈ f(x0).
pub fn krylov_kernel_side(table: &KernelTable, x0: f64, horizon: f64, f: &dyn Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
    let tg = &table.lattice.time;
    if horizon > tg.horizon * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("horizon {horizon} beyond the table")));
    }
    let gl = gauss_legendre(8);
    let mut s = tg.t_min() * f(x0);
    let mut lo = tg.t_min();
    while lo < horizon * (1.0 - 1e-12) {
        let hi = (2.0 * lo).min(horizon);
        let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (u, w) in gl.0.iter().zip(&gl.1) {
            s += r * w * table.semigroup_at_with(c + r * u, x0, f, breaks)?;
        }
        lo = hi;
    }
    Ok(s)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StrongErrorTable {
    pub dts: Vec<f64>,
    /// E sup_t |X^{Δt_k} − X^{Δt_{k+1}}| on the coarsest mesh, with standard errors.
    pub errors: Vec<f64>,
    pub std_errs: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
}

impl StrongErrorTable {
    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

fn sup_gap(a: &[f64], stride_a: usize, b: &[f64], stride_b: usize) -> f64 {
    let n = (a.len() - 1) / stride_a;
    (0..=n).map(|j| (a[j * stride_a] - b[j * stride_b]).abs()).fold(0.0, f64::max)
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Shared-noise multiresolution runs: errors between successive halvings of Δt.
#[allow(clippy::too_many_arguments)]
pub fn pathwise_uniqueness_experiment(
    coeffs: &SdeCoeffs,
    spec: &LevyNoiseSpec,
    x0: f64,
    horizon: f64,
    dts: &[f64],
    paths: usize,
    seed: u64,
) -> Result<StrongErrorTable> {
    if dts.len() < 2 {
        return Err(Error::Config { field: "resolutions".into(), msg: "need at least two".into() });
    }
    let strides: Vec<usize> = dts.iter().map(|d| (dts[0] / d).round() as usize).collect();
    let mut gaps = vec![Vec::with_capacity(paths); dts.len() - 1];
    for i in 0..paths {
        let noise = sample_noise(spec, horizon, seed, i as u64)?;
        let runs: Vec<Trajectory> = dts.iter().map(|&d| simulate_path(x0, coeffs, &noise, d, true)).collect::<Result<_>>()?;
        for k in 0..dts.len() - 1 {
            gaps[k].push(sup_gap(&runs[k].mesh, strides[k], &runs[k + 1].mesh, strides[k + 1]));
        }
    }
    let (errors, std_errs) = gaps.iter().map(|g| mean_se(g)).unzip();
    Ok(StrongErrorTable { dts: dts.to_vec(), errors, std_errs, paths, seed })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CoupledReport {
    /// E sup_t |Φ(X_t) − Y_t| on the mesh.
    pub distance: f64,
    pub distance_se: f64,
    /// E sup_t |X^{Δt} − X^{Δt/2}| under the same noise.
    pub baseline: f64,
    pub baseline_se: f64,
}

/// X from the model SDE and Y from the transformed SDE under one noise realization per path.
#[allow(clippy::too_many_arguments)]
pub fn zvonkin_coupled_run(
    model: &ModelSpec,
    map: &ZvonkinMap,
    y_coeffs: &SdeCoeffs,
    spec: &LevyNoiseSpec,
    x0: f64,
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
) -> Result<CoupledReport> {
    let xc = SdeCoeffs::from_model(model, spec);
    let (mut dist, mut base) = (Vec::with_capacity(paths), Vec::with_capacity(paths));
    for i in 0..paths {
        let noise = sample_noise(spec, horizon, seed, i as u64)?;
        let x = simulate_path(x0, &xc, &noise, dt, true)?;
        let xf = simulate_path(x0, &xc, &noise, 0.5 * dt, true)?;
        let y = simulate_path(map.forward(x0), y_coeffs, &noise, dt, true)?;
        let d = x.mesh.iter().zip(&y.mesh).map(|(a, b)| (map.forward(*a) - b).abs()).fold(0.0, f64::max);
        dist.push(d);
        base.push(sup_gap(&x.mesh, 1, &xf.mesh, 2));
    }
    let (distance, distance_se) = mean_se(&dist);
    let (baseline, baseline_se) = mean_se(&base);
    Ok(CoupledReport { distance, distance_se, baseline, baseline_se })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GeneratorReport {
    pub estimate: f64,
    pub std_err: f64,
    /// 𝓛f(x0) = 𝓛^κf(x0) + b(x0)f′(x0) by quadrature.
    pub reference: f64,
}

/// Drift of f(X_t) at t = 0 by per-path least squares on (t, t²) over the observation times.
#[allow(clippy::too_many_arguments)]
pub fn generator_check(
    model: &ModelSpec,
    spec: &LevyNoiseSpec,
    x0: f64,
    f: &dyn Fn(f64) -> f64,
    df: &dyn Fn(f64) -> f64,
    horizon: f64,
    observations: usize,
    substeps: usize,
    paths: usize,
    seed: u64,
) -> Result<GeneratorReport> {
    let ts: Vec<f64> = (1..=observations).map(|k| horizon * k as f64 / observations as f64).collect();
    // weights of the t-coefficient in the no-intercept fit y ≈ a t + c t²
    let (s2, s3, s4) = ts.iter().fold((0.0, 0.0, 0.0), |a, t| (a.0 + t * t, a.1 + t * t * t, a.2 + t.powi(4)));
    let det = s2 * s4 - s3 * s3;
    let w: Vec<f64> = ts.iter().map(|t| (s4 * t - s3 * t * t) / det).collect();
    let coeffs = SdeCoeffs::from_model(model, spec);
    let dt = horizon / (observations * substeps) as f64;
    let fx0 = f(x0);
    let mut est = Vec::with_capacity(paths);
    for i in 0..paths {
        let noise = sample_noise(spec, horizon, seed, i as u64)?;
        let tr = simulate_path(x0, &coeffs, &noise, dt, true)?;
        let a: f64 = (1..=observations).map(|k| w[k - 1] * (f(tr.mesh[k * substeps]) - fx0)).sum();
        est.push(a);
    }
    let (estimate, std_err) = mean_se(&est);
    let kap = |z: &[f64]| model.kappa(x0, z[0]);
    let g = |v: &[f64]| f(v[0]);
    let reference = apply_nonlocal(&g, &[x0], &kap, &NonlocalQuad::default())? + model.drift(x0) * df(x0);
    Ok(GeneratorReport { estimate, std_err, reference })
}

/// CSV with columns path_id, t, x_1.
pub fn write_trajectories_csv(ens: &PathEnsemble, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "path_id,t,x_1")?;
    for (i, p) in ens.paths.iter().enumerate() {
        for (j, x) in p.iter().enumerate() {
            writeln!(w, "{i},{:.17e},{x:.17e}", j as f64 * ens.dt)?;
        }
    }
    Ok(())
}
