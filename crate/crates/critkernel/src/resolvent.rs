//! Semigroup action, the resolvent equation λu − 𝓛u = b, and the Zvonkin map Φ = id + u.

use crate::base_kernels::{apply_nonlocal, NonlocalQuad};
use crate::error::{Error, Result};
use crate::interp::UniformSpline;
use crate::parametrix::{KernelTable, ModelSpec};
use crate::quad::{gauss_legendre, linear_fit};
use crate::sde_sim::LevyNoiseSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ResolventConfig {
    /// Fixed λ; `None` starts at 4(1 + ‖b‖_{C^θ}) and doubles until (es2) holds.
    pub lambda: Option<f64>,
    /// Upper end of the time integral; defaults to the table horizon.
    pub t_max: Option<f64>,
    /// Gauss nodes per octave for the exponential weights.
    pub nodes: usize,
    /// Budget for the truncated tail ‖b‖ e^{−λT_max}/λ.
    pub tol: f64,
    pub max_doublings: usize,
    /// Sample points per period (periodic models).
    pub points_per_period: usize,
}

impl Default for ResolventConfig {
    fn default() -> Self {
        Self { lambda: None, t_max: None, nodes: 16, tol: 1e-3, max_doublings: 8, points_per_period: 128 }
    }
}

/// 𝒯_t f at the points `xs`.
pub fn semigroup_apply(table: &KernelTable, t: f64, f: &dyn Fn(f64) -> f64, xs: &[f64]) -> Result<Vec<f64>> {
    xs.iter().map(|&x| table.semigroup_at(t, x, f)).collect()
}

/// Spline samples with periodic wrap or constant extension outside the sampled range.
#[derive(Clone, Debug)]
pub struct TabulatedField {
    pub x0: f64,
    pub h: f64,
    pub values: Vec<f64>,
    pub period: Option<f64>,
    /// Samples in the margin on each side (periodic case).
    pub margin: usize,
    spline: UniformSpline,
}

impl TabulatedField {
    pub fn new(x0: f64, h: f64, values: Vec<f64>, period: Option<f64>, margin: usize) -> Self {
        let spline = UniformSpline::new(x0, h, values.clone());
        Self { x0, h, values, period, margin, spline }
    }

    fn end(&self) -> f64 {
        self.x0 + self.h * (self.values.len() - 1) as f64
    }

    fn map(&self, x: f64) -> f64 {
        match self.period {
            Some(p) => {
                let lo = self.x0 + self.margin as f64 * self.h;
                lo + (x - lo).rem_euclid(p)
            }
            None => x.clamp(self.x0, self.end()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.spline.eval(self.map(x))
    }

    pub fn deriv(&self, x: f64) -> f64 {
        if self.period.is_none() && (x < self.x0 || x > self.end()) {
            return 0.0;
        }
        self.spline.deriv(self.map(x))
    }

    /// Points of one period (periodic) or all samples.
    pub fn core_points(&self) -> Vec<f64> {
        let n = self.values.len() - 2 * self.margin;
        (0..n).map(|j| self.x0 + (self.margin + j) as f64 * self.h).collect()
    }

    pub fn sup(&self) -> f64 {
        let core = &self.values[self.margin..self.values.len() - self.margin];
        core.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Mean value far away: the period average, or the mean of the two ends.
    pub fn far_mean(&self) -> f64 {
        match self.period {
            Some(_) => {
                let core = &self.values[self.margin..self.values.len() - self.margin];
                core.iter().sum::<f64>() / core.len() as f64
            }
            None => 0.5 * (self.values[0] + self.values[self.values.len() - 1]),
        }
    }
}

/// Sample layout for u: one period plus margins, or the interior half of the lattice.
fn sample_layout(table: &KernelTable, model: &ModelSpec, per_period: usize) -> (f64, f64, usize, usize, Option<f64>) {
    match model.period {
        Some(p) => {
            let h = p / per_period as f64;
            let margin = 8;
            (-0.5 * p - margin as f64 * h, h, per_period, margin, Some(p))
        }
        None => {
            let sp = &table.lattice.space;
            let h = 2.0 * sp.h;
            let half = 0.5 * sp.half_width;
            let n = (2.0 * half / h).round() as usize + 1;
            (-half, h, n, 0, None)
        }
    }
}

/// Tabulated 𝒯_{t_k}b and ∇𝒯_{t_k}b at the sample points; λ-independent.
pub struct ResolventSolver<'a> {
    pub table: &'a KernelTable,
    pub cfg: ResolventConfig,
    x0: f64,
    h: f64,
    core: usize,
    margin: usize,
    period: Option<f64>,
    /// [time node][core sample]
    tb: Vec<Vec<f64>>,
    tgrad: Vec<Vec<f64>>,
    b_at: Vec<f64>,
    t_max: f64,
}

/// u and ∇u at one λ with the measured (es2) norms.
#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub lambda: f64,
    pub u: TabulatedField,
    pub grad: TabulatedField,
    pub u_sup: f64,
    pub grad_sup: f64,
    /// ‖b‖ e^{−λT_max}/λ, reported as an error budget.
    pub tail_budget: f64,
    pub model_hash: String,
    pub doublings: usize,
}

impl ResolventSolution {
    pub fn es2(&self) -> f64 {
        self.u_sup + self.grad_sup
    }
}

impl<'a> ResolventSolver<'a> {
    pub fn new(table: &'a KernelTable, cfg: &ResolventConfig) -> Result<Self> {
        let model = table.lattice.model().clone();
        let horizon = table.lattice.time.horizon;
        let t_max = cfg.t_max.unwrap_or(horizon);
        if t_max > horizon * (1.0 + 1e-12) || t_max <= table.lattice.time.t_min() {
            return Err(Error::Domain(format!("t_max = {t_max} outside the table range")));
        }
        if cfg.nodes < 2 {
            return Err(Error::Config { field: "nodes".into(), msg: "need at least 2 nodes".into() });
        }
        let (x0, h, core, margin, period) = sample_layout(table, &model, cfg.points_per_period);
        let xs: Vec<f64> = (0..core).map(|j| x0 + (margin + j) as f64 * h).collect();
        let b = |y: f64| model.drift(y);
        let times = table.times().to_vec();
        let mut tb = Vec::with_capacity(times.len());
        let mut tgrad = Vec::with_capacity(times.len());
        let zero_drift = (0..64).all(|i| model.drift(-8.0 + 0.25 * i as f64 + 0.013) == 0.0);
        for &t in &times {
            if zero_drift {
                tb.push(vec![0.0; core]);
                tgrad.push(vec![0.0; core]);
                continue;
            }
            let mut row = Vec::with_capacity(core);
            let mut grow = Vec::with_capacity(core);
            for &x in &xs {
                row.push(table.semigroup_at(t, x, &b)?);
                grow.push(table.grad_semigroup_at(t, x, &b)?);
            }
            tb.push(row);
            tgrad.push(grow);
        }
        let b_at = xs.iter().map(|&x| model.drift(x)).collect();
        Ok(Self { table, cfg: cfg.clone(), x0, h, core, margin, period, tb, tgrad, b_at, t_max })
    }

    /// ∫_{t_min}^{T_max} e^{−λt} ℓ_k(t) dt for every time node k.
    fn weights(&self, lambda: f64) -> Vec<f64> {
        let tg = &self.table.lattice.time;
        let gl = gauss_legendre(self.cfg.nodes);
        let mut w = vec![0.0; tg.len()];
        let mut lo = tg.t_min();
        while lo < self.t_max * (1.0 - 1e-12) {
            let hi = (2.0 * lo).min(self.t_max);
            let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            for (u, wt) in gl.0.iter().zip(&gl.1) {
                let t = c + r * u;
                let e = r * wt * (-lambda * t).exp();
                let (first, l) = tg.stencil(t);
                for (j, v) in l.iter().enumerate() {
                    w[first + j] += e * v;
                }
            }
            lo = hi;
        }
        w
    }

    fn field(&self, core: Vec<f64>) -> TabulatedField {
        let n = core.len();
        let m = self.margin;
        let values: Vec<f64> = (0..n + 2 * m).map(|j| core[(j + n - m) % n]).collect();
        TabulatedField::new(self.x0, self.h, values, self.period, m)
    }

    pub fn solve_at(&self, lambda: f64) -> ResolventSolution {
        let model = self.table.lattice.model();
        let w = self.weights(lambda);
        let t_min = self.table.lattice.time.t_min();
        // below t_min: 𝒯_t b ≈ b and ∇𝒯_t b ≈ its value at t_min
        let w0 = (1.0 - (-lambda * t_min).exp()) / lambda;
        let mut u = vec![0.0; self.core];
        let mut g = vec![0.0; self.core];
        for j in 0..self.core {
            u[j] = w0 * self.b_at[j];
            g[j] = w0 * self.tgrad[0][j];
            for (k, wk) in w.iter().enumerate() {
                u[j] += wk * self.tb[k][j];
                g[j] += wk * self.tgrad[k][j];
            }
        }
        let u = self.field(u);
        let grad = self.field(g);
        let (u_sup, grad_sup) = (u.sup(), grad.sup());
        ResolventSolution {
            lambda,
            tail_budget: model.b_sup * (-lambda * self.t_max).exp() / lambda,
            u,
            grad,
            u_sup,
            grad_sup,
            model_hash: model.hash(),
            doublings: 0,
        }
    }

    /// λ from the config, or the doubling search; fails if (es2) or the tail budget does not hold.
    pub fn solve(&self) -> Result<ResolventSolution> {
        let model = self.table.lattice.model();
        let (mut lambda, tries) = match self.cfg.lambda {
            Some(l) if l > 0.0 => (l, 0),
            Some(l) => return Err(Error::Config { field: "lambda".into(), msg: format!("{l} must be positive") }),
            None => (4.0 * (1.0 + model.b_holder), self.cfg.max_doublings),
        };
        let mut k = 0;
        loop {
            let mut sol = self.solve_at(lambda);
            sol.doublings = k;
            let ok = sol.es2() <= 0.5 && sol.tail_budget <= self.cfg.tol;
            if ok {
                return Ok(sol);
            }
            if k >= tries {
                return Err(Error::LambdaTooSmall { lambda, u_sup: sol.u_sup, grad_sup: sol.grad_sup });
            }
            lambda *= 2.0;
            k += 1;
        }
    }
}

/// Resolvent solution u of λu − 𝓛^κu − b·∇u = b from the kernel table.
pub fn solve_resolvent(table: &KernelTable, cfg: &ResolventConfig) -> Result<ResolventSolution> {
    ResolventSolver::new(table, cfg)?.solve()
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PideResidual {
    pub x: f64,
    pub lambda_u: f64,
    pub nonlocal: f64,
    pub drift: f64,
    pub b: f64,
    pub residual: f64,
}

/// |λu − 𝓛^κu − b·∇u − b| at x, with 𝓛^κ applied to the spline of u.
pub fn pide_residual(sol: &ResolventSolution, model: &ModelSpec, x: f64) -> Result<PideResidual> {
    let f = |v: &[f64]| sol.u.eval(v[0]);
    let kap = |z: &[f64]| model.kappa(x, z[0]);
    // spline third derivatives jump at the knots; 1e-5 is the reliable level
    let nonlocal = apply_nonlocal(&f, &[x], &kap, &NonlocalQuad { tol: 1e-5, ..Default::default() })?;
    let lambda_u = sol.lambda * sol.u.eval(x);
    let drift = model.drift(x) * sol.u.deriv(x);
    let b = model.drift(x);
    Ok(PideResidual { x, lambda_u, nonlocal, drift, b, residual: (lambda_u - nonlocal - drift - b).abs() })
}

/// sup|∇u| for each λ, and the log-log slope.
pub fn gradient_trend(solver: &ResolventSolver, lambdas: &[f64]) -> (Vec<(f64, f64)>, f64) {
    let pts: Vec<(f64, f64)> = lambdas.iter().map(|&l| (l, solver.solve_at(l).grad_sup)).collect();
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let slope = if pts.len() >= 2 { linear_fit(&lx, &ly).0 } else { f64::NAN };
    (pts, slope)
}

/// sup_x|∇𝒯_t f| for f = sign(y − c) on a window around c, at each t; with slope and its standard error.
pub fn semigroup_gradient_scaling(table: &KernelTable, c: f64, ts: &[f64]) -> Result<(Vec<(f64, f64)>, f64, f64)> {
    let f = |y: f64| if y >= c { 1.0 } else { -1.0 };
    let mut pts = Vec::new();
    for &t in ts {
        let b = table.lattice.model().drift(c);
        // the peak of ∇𝒯_t f sits where x + b(x)t ≈ c
        let centre = c - b * t;
        let mut best = 0.0f64;
        for k in -40..=40 {
            let x = centre + 0.05 * t * k as f64;
            best = best.max(table.grad_semigroup_at_with(t, x, &f, &[c])?.abs());
        }
        pts.push((t, best));
    }
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (slope, _, se) = linear_fit(&lx, &ly);
    Ok((pts, slope, se))
}

/// Φ = id + u with inverse by fixed-point iteration.
#[derive(Clone, Debug)]
pub struct ZvonkinMap {
    pub u: TabulatedField,
    pub grad: TabulatedField,
    pub lambda: f64,
    pub model_hash: String,
    pub tol: f64,
}

impl ZvonkinMap {
    pub fn new(sol: &ResolventSolution) -> Result<Self> {
        if sol.es2() > 0.5 {
            return Err(Error::InconsistentMap(format!("(es2) fails: {:.4}", sol.es2())));
        }
        Ok(Self { u: sol.u.clone(), grad: sol.grad.clone(), lambda: sol.lambda, model_hash: sol.model_hash.clone(), tol: 1e-10 })
    }

    /// u ≡ 0.
    pub fn identity() -> Self {
        let z = TabulatedField::new(-1.0, 1.0, vec![0.0; 3], None, 0);
        Self { u: z.clone(), grad: z, lambda: 0.0, model_hash: String::new(), tol: 1e-10 }
    }

    pub fn u(&self, x: f64) -> f64 {
        self.u.eval(x)
    }

    /// ∇u of the spline used by Φ.
    pub fn du(&self, x: f64) -> f64 {
        self.u.deriv(x)
    }

    pub fn forward(&self, x: f64) -> f64 {
        x + self.u(x)
    }

    pub fn inverse(&self, y: f64) -> Result<f64> {
        let mut x = y - self.u(y);
        let mut prev = f64::INFINITY;
        for _ in 0..200 {
            let nx = y - self.u(x);
            let step = (nx - x).abs();
            x = nx;
            if step <= self.tol {
                return Ok(x);
            }
            if step > 0.75 * prev {
                return Err(Error::InconsistentMap(format!("iteration not contracting at y = {y}")));
            }
            prev = step;
        }
        Err(Error::InconsistentMap(format!("no convergence at y = {y}")))
    }

    /// Worst round trip |Φ⁻¹(Φ(x)) − x| and the range of |Φ(x)−Φ(y)|/|x−y| over random probes.
    pub fn probe(&self, count: usize, seed: u64, spread: f64) -> Result<ZvonkinProbe> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut round_trip, mut lo, mut hi) = (0.0f64, f64::INFINITY, 0.0f64);
        for _ in 0..count {
            let x: f64 = rng.random_range(-spread..spread);
            let y: f64 = rng.random_range(-spread..spread);
            round_trip = round_trip.max((self.inverse(self.forward(x))? - x).abs());
            if (x - y).abs() > 1e-9 {
                let r = (self.forward(x) - self.forward(y)).abs() / (x - y).abs();
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        Ok(ZvonkinProbe { round_trip, lip_min: lo, lip_max: hi })
    }

    /// Text artifact in the kernel table container format.
    pub fn write_text(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "# critkernel zvonkin map v1")?;
        writeln!(w, "# lambda {:e}", self.lambda)?;
        let p = self.u.period.map_or("none".to_string(), |p| format!("{p:.17e}"));
        writeln!(w, "# samples x0 {:.17e} h {:.17e} n {} margin {} period {p}", self.u.x0, self.u.h, self.u.values.len(), self.u.margin)?;
        writeln!(w, "# model hash {}", self.model_hash)?;
        writeln!(w, "# columns x u grad_u")?;
        for (j, (u, g)) in self.u.values.iter().zip(&self.grad.values).enumerate() {
            writeln!(w, "{:.17e} {u:.17e} {g:.17e}", self.u.x0 + j as f64 * self.u.h)?;
        }
        Ok(())
    }

    pub fn read_text(r: impl BufRead) -> Result<Self> {
        let bad = |m: &str| Error::Config { field: "zvonkin map".into(), msg: m.into() };
        let (mut lambda, mut x0, mut h, mut margin, mut period, mut hash) = (f64::NAN, 0.0, 0.0, 0, None, String::new());
        let (mut us, mut gs) = (Vec::new(), Vec::new());
        for line in r.lines() {
            let line = line?;
            if let Some(rest) = line.strip_prefix("# ") {
                let f: Vec<&str> = rest.split_whitespace().collect();
                match f.first().copied() {
                    Some("lambda") => lambda = f[1].parse().map_err(|_| bad("lambda"))?,
                    Some("samples") if f.len() >= 11 => {
                        x0 = f[2].parse().map_err(|_| bad("x0"))?;
                        h = f[4].parse().map_err(|_| bad("h"))?;
                        margin = f[8].parse().map_err(|_| bad("margin"))?;
                        period = if f[10] == "none" { None } else { Some(f[10].parse().map_err(|_| bad("period"))?) };
                    }
                    Some("model") if f.len() >= 3 => hash = f[2].to_string(),
                    _ => {}
                }
            } else if !line.trim().is_empty() {
                let v: Vec<f64> = line.split_whitespace().map(|s| s.parse().map_err(|_| bad("value"))).collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(bad("expected 3 columns"));
                }
                us.push(v[1]);
                gs.push(v[2]);
            }
        }
        if us.len() < 3 {
            return Err(bad("too few samples"));
        }
        Ok(Self {
            u: TabulatedField::new(x0, h, us, period, margin),
            grad: TabulatedField::new(x0, h, gs, period, margin),
            lambda,
            model_hash: hash,
            tol: 1e-10,
        })
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ZvonkinProbe {
    pub round_trip: f64,
    pub lip_min: f64,
    pub lip_max: f64,
}

/// Coefficients of Y = Φ(X): b̃, g̃, σ̃, and the drift of Y between simulated events.
pub struct TransformedCoeffs {
    pub map: Arc<ZvonkinMap>,
    pub model: ModelSpec,
    pub noise: LevyNoiseSpec,
    /// b̃ on the map samples.
    pub b_tilde: TabulatedField,
    /// Drift of Y between simulated events: b̃ − ∫_{|z|≤1}[u(x+z) − u(x)]σ(x,z)ν(dz), x = Φ⁻¹(y).
    pub y_drift: TabulatedField,
    /// Bound on the neglected far-jump part when u is not periodic.
    pub truncation_bound: f64,
}

/// ∫_{lo ≤ |z| ≤ hi} [u(x+z) − u(x)] κ(x,z)|z|^{−2} dz, folded onto z > 0.
fn band_integral(map: &ZvonkinMap, model: &ModelSpec, x: f64, lo: f64, hi: f64) -> f64 {
    let ux = map.u(x);
    let gl = gauss_legendre(8);
    let mut s = 0.0;
    let mut panel = |a: f64, b: f64| {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (v, w) in gl.0.iter().zip(&gl.1) {
            let z = c + r * v;
            let d2 = map.u(x + z) + map.u(x - z) - 2.0 * ux;
            s += r * w * d2 * model.kappa(x, z) / (z * z);
        }
    };
    let mut a = lo;
    while a < hi.min(1.0) {
        let b = (2.0 * a).min(hi.min(1.0));
        panel(a, b);
        a = b;
    }
    let mut a = lo.max(1.0);
    while a < hi {
        let b = (a + 0.5).min(hi);
        panel(a, b);
        a = b;
    }
    s
}

/// ∫_{|z| > r} [u(x+z) − u(x)] κ|z|^{−2} dz with κ frozen at its limit and u(x±z) by its far mean.
fn far_tail(map: &ZvonkinMap, model: &ModelSpec, x: f64, r: f64) -> f64 {
    let k_inf = model.k0.at_inf + model.k1.as_ref().map_or(0.0, |k| model.a_at(x) * k.at_inf);
    2.0 * (map.u.far_mean() - map.u(x)) * k_inf / r
}

pub fn transformed_coeffs(map: Arc<ZvonkinMap>, model: &ModelSpec, noise: &LevyNoiseSpec) -> Result<TransformedCoeffs> {
    noise.validate()?;
    let r_far = 256.0;
    let ys = &map.u;
    let n = ys.values.len();
    let mut bt = Vec::with_capacity(n);
    let mut yd = Vec::with_capacity(n);
    for j in 0..n {
        // samples are uniform in y; each needs x = Φ⁻¹(y)
        let y = ys.x0 + j as f64 * ys.h;
        let x = map.inverse(y)?;
        let big = band_integral(&map, model, x, 1.0, r_far) + far_tail(&map, model, x, r_far);
        // the whole band |z| ≤ 1, not only ε ≤ |z| ≤ 1: the jumps of X below ε are dropped
        // too, and their Itô correction to Φ(X) is the small-|z| part of this integral
        let small = band_integral(&map, model, x, 1e-7, 1.0);
        let b = map.lambda * map.u(x) - big;
        bt.push(b);
        yd.push(b - small);
    }
    let truncation_bound = if ys.period.is_some() { 0.0 } else { 2.0 * map.u.sup() * model.kappa1 * 2.0 / r_far };
    Ok(TransformedCoeffs {
        b_tilde: TabulatedField::new(ys.x0, ys.h, bt, ys.period, ys.margin),
        y_drift: TabulatedField::new(ys.x0, ys.h, yd, ys.period, ys.margin),
        map,
        model: model.clone(),
        noise: noise.clone(),
        truncation_bound,
    })
}

impl TransformedCoeffs {
    pub fn b_tilde(&self, y: f64) -> f64 {
        self.b_tilde.eval(y)
    }

    /// g̃(y,z) = Φ(Φ⁻¹(y) + z) − y.
    pub fn g_tilde(&self, y: f64, z: f64) -> Result<f64> {
        let x = self.map.inverse(y)?;
        Ok(self.map.forward(x + z) - y)
    }

    /// σ̃(y,z) = σ(Φ⁻¹(y), z).
    pub fn sigma_tilde(&self, y: f64, z: f64) -> Result<f64> {
        Ok(self.noise.sigma(&self.model, self.map.inverse(y)?, z))
    }

    /// Drift of Y between the simulated events, consistent with dropping |z| < ε in X.
    pub fn y_drift(&self, y: f64) -> f64 {
        self.y_drift.eval(y)
    }

    /// Fitted constants of the Lipschitz bounds on b̃ and g̃ over random pairs:
    /// C₁ with weight 1 + h(Φ⁻¹x) + h(Φ⁻¹y), C₂ with |z|^γ.
    pub fn lipschitz_fits(&self, h: &dyn Fn(f64) -> f64, gamma: f64, pairs: usize, seed: u64) -> Result<(f64, f64)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut c1, mut c2) = (0.0f64, 0.0f64);
        for _ in 0..pairs {
            let x: f64 = rng.random_range(-3.0..3.0);
            let y = x + rng.random_range(-1.0..1.0) * 10f64.powf(rng.random_range(-3.0..0.0));
            let d = (x - y).abs();
            if d < 1e-12 {
                continue;
            }
            let (xi, yi) = (self.map.inverse(x)?, self.map.inverse(y)?);
            c1 = c1.max((self.b_tilde(x) - self.b_tilde(y)).abs() / (d * (1.0 + h(xi) + h(yi))));
            let z = rng.random_range(0.01f64..4.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
            c2 = c2.max((self.g_tilde(x, z)? - self.g_tilde(y, z)?).abs() / (d * z.abs().powf(gamma)));
        }
        Ok((c1, c2))
    }
}
