//! The fundamental solution p = p₀ + 𝒬 on the lattice, with pointwise evaluation.

use super::kernels::KernelKind;
use super::series::{Lattice, ParametrixState};
use crate::base_kernels::{apply_nonlocal, NonlocalQuad};
use crate::error::{Error, Result};
use crate::interp::UniformSpline;
use crate::linalg::Mat;
use crate::quad::gauss_legendre;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

pub struct KernelTable {
    pub lattice: Arc<Lattice>,
    /// 𝒬(t_i, x_j, y_k)
    pub qcal: Vec<Mat>,
    /// ∂ₓ𝒬(t_i, x_j, y_k)
    pub grad_qcal: Vec<Mat>,
    pub tolerance: f64,
    pub tail_bound: f64,
    pub order: usize,
    /// Smallest pre-clamp node value.
    pub min_value: f64,
    /// Fraction of node values below zero (clamped for density use).
    pub clamped_fraction: f64,
    pub model_hash: String,
}

/// p(t,·,y) as a function of x: exact p₀ plus a spline of 𝒬.
pub struct PField<'a> {
    table: &'a KernelTable,
    fam: Arc<crate::base_kernels::family::KernelFamily>,
    y: f64,
    q: UniformSpline,
}

impl PField<'_> {
    pub fn eval(&self, x: f64) -> f64 {
        self.table.kernels().eval(&self.fam, KernelKind::P0, x, self.y) + self.q.eval(x)
    }

    pub fn grad(&self, x: f64) -> f64 {
        self.table.kernels().eval(&self.fam, KernelKind::DP0, x, self.y) + self.q.deriv(x)
    }
}

/// 𝒬 and ∇𝒬 at the nodes from the series state.
pub fn assemble_p(state: &ParametrixState) -> KernelTable {
    let lat = state.lattice.clone();
    let nt = lat.time.len();
    let n = lat.space.n;
    let constant = lat.model().is_constant_coefficient();
    let mut qcal = Vec::with_capacity(nt);
    let mut grad_qcal = Vec::with_capacity(nt);
    for i in 0..nt {
        if constant {
            qcal.push(Mat::zeros(n));
            grad_qcal.push(Mat::zeros(n));
            continue;
        }
        let w = &lat.weights[i];
        let build = |hat: fn(&super::series::NodeMats) -> &Mat, pt: fn(&super::series::NodeMats) -> &Mat| {
            let mut m = lat.convolve(&w.right, |k| hat(&lat.mats[k]), |m| &lat.mats[m].q0);
            m.axpy(1.0, &lat.convolve(&w.left, |k| pt(&lat.mats[k]), |m| &lat.mats[m].b));
            m.axpy(1.0, &lat.convolve(&w.full, |k| hat(&lat.mats[k]), |m| &state.r_sum[m]));
            m
        };
        qcal.push(build(|m| &m.ap, |m| &m.p0));
        grad_qcal.push(build(|m| &m.apd, |m| &m.dp0));
    }
    let mut min_value = f64::INFINITY;
    let mut neg = 0usize;
    for i in 0..nt {
        for (p0, q) in lat.mats[i].p0.data.iter().zip(&qcal[i].data) {
            let v = p0 + q;
            min_value = min_value.min(v);
            if v < 0.0 {
                neg += 1;
            }
        }
    }
    let model_hash = lat.model().hash();
    KernelTable {
        qcal,
        grad_qcal,
        tolerance: lat.config.quad_tol,
        tail_bound: state.tail_bound,
        order: state.order,
        min_value,
        clamped_fraction: neg as f64 / (nt * n * n) as f64,
        model_hash,
        lattice: lat,
    }
}

impl KernelTable {
    pub fn kernels(&self) -> &super::kernels::FrozenKernels {
        &self.lattice.kernels
    }

    pub fn times(&self) -> &[f64] {
        &self.lattice.time.nodes
    }

    /// Pre-clamp node value p(t_i, x_j, y_k).
    pub fn node_value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.lattice.mats[i].p0.get(j, k) + self.qcal[i].get(j, k)
    }

    /// Clamped node value for density use.
    pub fn density(&self, i: usize, j: usize, k: usize) -> f64 {
        self.node_value(i, j, k).max(0.0)
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let tg = &self.lattice.time;
        if !(t >= tg.t_min() * (1.0 - 1e-12) && t <= tg.horizon * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("t = {t} outside the tabulated range [{}, {}]", tg.t_min(), tg.horizon)));
        }
        Ok(())
    }

    /// Column of 𝒬(t,·,y) (or ∇𝒬) interpolated in t and y.
    fn column(&self, tabs: &[Mat], t: f64, y: f64) -> Vec<f64> {
        let g = &self.lattice.space;
        let n = g.n;
        let mut out = vec![0.0; n];
        let Some((l, f)) = g.locate(y) else { return out };
        let (first, w) = self.lattice.time.stencil(t);
        for (j, wj) in w.iter().enumerate() {
            let m = &tabs[first + j];
            for (i, o) in out.iter_mut().enumerate() {
                *o += wj * ((1.0 - f) * m.get(i, l) + f * m.get(i, (l + 1).min(n - 1)));
            }
        }
        out
    }

    pub fn field(&self, t: f64, y: f64) -> Result<PField<'_>> {
        self.check_time(t)?;
        let g = &self.lattice.space;
        let col = self.column(&self.qcal, t, y);
        Ok(PField { table: self, fam: self.kernels().family(t), y, q: UniformSpline::new(-g.half_width, g.h, col) })
    }

    /// Pointwise p(t,x,y).
    pub fn p(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.field(t, y)?.eval(x))
    }

    /// Pointwise ∇ₓp(t,x,y) from the tabulated ∇𝒬.
    pub fn grad(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        self.check_time(t)?;
        let g = &self.lattice.space;
        let col = self.column(&self.grad_qcal, t, y);
        let fam = self.kernels().family(t);
        let s = UniformSpline::new(-g.half_width, g.h, col);
        Ok(self.kernels().eval(&fam, KernelKind::DP0, x, y) + s.eval(x))
    }

    /// ∫ p(t_i, x_j, y) dy: quadrature of p₀ plus the lattice sum of 𝒬.
    pub fn row_sum(&self, i: usize, j: usize) -> f64 {
        let t = self.lattice.time.nodes[i];
        let x = self.lattice.space.x(j);
        self.semigroup_at(t, x, &|_| 1.0).expect("node time is in range")
    }

    /// 𝒬(t,x,y_k) (or ∇ₓ𝒬) for every lattice y_k: Lagrange in log t, linear in x.
    /// Zero when x is off the lattice.
    pub fn qcal_row(&self, t: f64, x: f64, grad: bool) -> Vec<f64> {
        let g = &self.lattice.space;
        let tabs = if grad { &self.grad_qcal } else { &self.qcal };
        let mut out = vec![0.0; g.n];
        let Some((l, f)) = g.locate(x) else { return out };
        let (first, w) = self.lattice.time.stencil(t);
        for (j, wj) in w.iter().enumerate() {
            let m = &tabs[first + j];
            let (r0, r1) = (m.row(l), m.row((l + 1).min(g.n - 1)));
            for (k, o) in out.iter_mut().enumerate() {
                *o += wj * ((1.0 - f) * r0[k] + f * r1[k]);
            }
        }
        out
    }

    /// ∫ K(t,x,y) g(y) dy for K = p₀ or ∂ₓp₀: graded panels around the peak out to
    /// |y − x| = 256, then the Cauchy tail weighted by the mean of g over [128, 256].
    pub fn integrate_p0(&self, t: f64, x: f64, kind: KernelKind, g: &dyn Fn(f64) -> f64) -> f64 {
        self.integrate_p0_with(t, x, kind, g, &[])
    }

    /// As [`Self::integrate_p0`], with extra panel breaks where g has kinks or jumps.
    pub fn integrate_p0_with(&self, t: f64, x: f64, kind: KernelKind, g: &dyn Fn(f64) -> f64, breaks: &[f64]) -> f64 {
        let lat = &self.lattice;
        let ker = self.kernels();
        let fam = ker.family(t);
        let f = |y: f64| ker.eval(&fam, kind, x, y) * g(y);
        let gl8 = gauss_legendre(8);
        let gl4 = gauss_legendre(4);
        let panel = |a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>)| {
            let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
            gl.0.iter().zip(&gl.1).map(|(u, w)| r * w * f(c + r * u)).sum::<f64>()
        };
        let peak = x + lat.model().drift(x) * t;
        let mut edges = vec![peak];
        let mut e = (0.25 * t).min(0.125);
        while e < 32.0 {
            edges.push(peak + e);
            edges.push(peak - e);
            e *= if e < 1.0 { 2.0 } else { 1.25 };
        }
        edges.push(peak + 32.0);
        edges.push(peak - 32.0);
        edges.extend(breaks.iter().copied().filter(|b| (b - peak).abs() < 32.0));
        edges.sort_by(f64::total_cmp);
        edges.dedup();
        let mut s = 0.0;
        for w in edges.windows(2) {
            s += panel(w[0], w[1], &gl8);
        }
        let r_far = 256.0;
        let mut a = 32.0;
        let (mut gsum, mut ssum, mut cnt) = (0.0, 0.0, 0.0);
        while a < r_far {
            let b = a + 1.0;
            s += panel(peak + a, peak + b, &gl4) + panel(peak - b, peak - a, &gl4);
            if a >= 0.5 * r_far {
                let m = lat.model();
                for y in [peak + a, peak - a] {
                    gsum += g(y);
                    ssum += fam.symbols().speed(m.a_at(y));
                    cnt += 1.0;
                }
            }
            a = b;
        }
        if kind == KernelKind::P0 {
            // Cauchy tails beyond r_far with the mean speed and mean g
            let sigma = t * ssum / cnt;
            s += (gsum / cnt) * 2.0 * (0.5 - (r_far / sigma).atan() / PI);
        }
        s
    }

    /// 𝒯_t g(x) = ∫ p(t,x,y) g(y) dy.
    pub fn semigroup_at(&self, t: f64, x: f64, g: &dyn Fn(f64) -> f64) -> Result<f64> {
        self.semigroup_at_with(t, x, g, &[])
    }

    /// 𝒯_t g(x) for g with kinks or jumps at `breaks`.
    pub fn semigroup_at_with(&self, t: f64, x: f64, g: &dyn Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
        self.check_time(t)?;
        let sp = &self.lattice.space;
        let q = self.qcal_row(t, x, false);
        let mut qs = 0.0;
        for (k, v) in q.iter().enumerate() {
            let w = if k == 0 || k == sp.n - 1 { 0.5 } else { 1.0 };
            qs += w * v * g(sp.x(k));
        }
        Ok(self.integrate_p0_with(t, x, KernelKind::P0, g, breaks) + sp.h * qs)
    }

    /// ∇𝒯_t g(x) = ∫ ∇ₓp(t,x,y)(g(y) − g(x)) dy (centred by conservation).
    pub fn grad_semigroup_at(&self, t: f64, x: f64, g: &dyn Fn(f64) -> f64) -> Result<f64> {
        self.grad_semigroup_at_with(t, x, g, &[])
    }

    pub fn grad_semigroup_at_with(&self, t: f64, x: f64, g: &dyn Fn(f64) -> f64, breaks: &[f64]) -> Result<f64> {
        self.check_time(t)?;
        let sp = &self.lattice.space;
        let gx = g(x);
        let centred = |y: f64| g(y) - gx;
        let q = self.qcal_row(t, x, true);
        let mut qs = 0.0;
        for (k, v) in q.iter().enumerate() {
            let w = if k == 0 || k == sp.n - 1 { 0.5 } else { 1.0 };
            qs += w * v * centred(sp.x(k));
        }
        Ok(self.integrate_p0_with(t, x, KernelKind::DP0, &centred, breaks) + sp.h * qs)
    }

    /// (p(t+s,x,y), ∫p(t,x,z)p(s,z,y)dz) at lattice x, y and node times t, s, t+s.
    pub fn chapman_kolmogorov(&self, ti: usize, si: usize, x: f64, y: f64) -> Result<(f64, f64)> {
        let lat = &self.lattice;
        let (t, s) = (lat.time.nodes[ti], lat.time.nodes[si]);
        let lhs = self.p(t + s, x, y)?;
        let ker = self.kernels();
        let (ft, fs) = (ker.family(t), ker.family(s));
        let g = &lat.space;
        let xi = g.index_of(x).ok_or_else(|| Error::Domain("x off the lattice".into()))?;
        let yi = g.index_of(y).ok_or_else(|| Error::Domain("y off the lattice".into()))?;
        // p₀ ∗ p₀ on the real line
        let gl = gauss_legendre(8);
        let mut pp = 0.0;
        let sc = t.min(s);
        let mut edges: Vec<f64> = Vec::new();
        let (lo, hi) = (x.min(y) - 40.0, x.max(y) + 40.0);
        let mut z = lo;
        while z < hi {
            edges.push(z);
            z += 0.25 * sc.max(0.25);
        }
        edges.push(hi);
        let f = |z: f64| ker.eval(&ft, KernelKind::P0, x, z) * ker.eval(&fs, KernelKind::P0, z, y);
        for w in edges.windows(2) {
            let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            pp += gl.0.iter().zip(&gl.1).map(|(u, wt)| r * wt * f(c + r * u)).sum::<f64>();
        }
        // beyond ±40 both factors are Cauchy-like: ∫ ≈ p₀(t,x,z)p₀(s,z,y) ~ σ_tσ_s/(π²z⁴)
        let st = t * ft.symbols().speed(lat.model().a_range.1);
        let ss = s * fs.symbols().speed(lat.model().a_range.1);
        pp += 2.0 * st * ss / (PI * PI * 3.0 * 40f64.powi(3));
        // cross terms on the lattice
        let (qt, qs) = (&self.qcal[ti], &self.qcal[si]);
        let mut cross = 0.0;
        for k in 0..g.n {
            let zk = g.x(k);
            let w = if k == 0 || k == g.n - 1 { 0.5 } else { 1.0 };
            let p0t = ker.eval(&ft, KernelKind::P0, x, zk);
            let p0s = ker.eval(&fs, KernelKind::P0, zk, y);
            let (a, b) = (qt.get(xi, k), qs.get(k, yi));
            cross += w * (p0t * b + a * p0s + a * b);
        }
        Ok((lhs, pp + g.h * cross))
    }

    /// |∂ₜp − 𝓛^{κ(x)}p − b(x)∇p| at (t,x,y); ∂ₜ by finite differences with step tied to the mesh.
    pub fn pde_residual(&self, t: f64, x: f64, y: f64) -> Result<PdeResidual> {
        if x == y {
            return Err(Error::Domain("pde residual needs x != y".into()));
        }
        let lat = &self.lattice;
        let dt = t * lat.space.h;
        if t - 2.0 * dt < lat.time.t_min() {
            return Err(Error::Domain(format!("t = {t} too close to the grid floor")));
        }
        let fp = |s: f64| self.p(s, x, y);
        let dpdt = if t + dt <= lat.time.horizon {
            (fp(t + dt)? - fp(t - dt)?) / (2.0 * dt)
        } else {
            (3.0 * fp(t)? - 4.0 * fp(t - dt)? + fp(t - 2.0 * dt)?) / (2.0 * dt)
        };
        let field = self.field(t, y)?;
        let model = lat.model();
        let kap = |z: &[f64]| model.kappa(x, z[0]);
        let f = |v: &[f64]| field.eval(v[0]);
        let lp = apply_nonlocal(&f, &[x], &kap, &NonlocalQuad::default())?;
        let drift = model.drift(x) * field.grad(x);
        Ok(PdeResidual { dpdt, nonlocal: lp, drift, residual: (dpdt - lp - drift).abs() })
    }

    /// Text artifact: header lines starting with '#', then one value per line,
    /// row-major in (time index, x index, y index).
    pub fn write_text(&self, w: &mut impl Write) -> std::io::Result<()> {
        let lat = &self.lattice;
        let g = &lat.space;
        writeln!(w, "# critkernel kernel table v1")?;
        writeln!(w, "# d 1")?;
        writeln!(w, "# space half_width {} h {} n {}", g.half_width, g.h, g.n)?;
        let ts: Vec<String> = lat.time.nodes.iter().map(|t| format!("{t:.17e}")).collect();
        writeln!(w, "# times {} {}", ts.len(), ts.join(" "))?;
        writeln!(w, "# tolerance {:e} tail_bound {:e} order {}", self.tolerance, self.tail_bound, self.order)?;
        writeln!(w, "# model {} hash {}", lat.model().name, self.model_hash)?;
        writeln!(w, "# columns p(t_i, x_j, y_k) row-major i,j,k; pre-clamp")?;
        for i in 0..lat.time.len() {
            for j in 0..g.n {
                for k in 0..g.n {
                    writeln!(w, "{:.17e}", self.node_value(i, j, k))?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct PdeResidual {
    pub dpdt: f64,
    pub nonlocal: f64,
    pub drift: f64,
    pub residual: f64,
}

/// Header fields and values of a text artifact.
#[derive(Debug)]
pub struct LoadedTable {
    pub half_width: f64,
    pub h: f64,
    pub n: usize,
    pub times: Vec<f64>,
    pub model_hash: String,
    pub values: Vec<f64>,
}

pub fn read_text(r: impl BufRead) -> Result<LoadedTable> {
    let mut out = LoadedTable { half_width: 0.0, h: 0.0, n: 0, times: vec![], model_hash: String::new(), values: vec![] };
    let bad = |m: &str| Error::Config { field: "kernel table".into(), msg: m.into() };
    for line in r.lines() {
        let line = line?;
        if let Some(rest) = line.strip_prefix("# ") {
            let f: Vec<&str> = rest.split_whitespace().collect();
            match f.first().copied() {
                Some("space") if f.len() >= 7 => {
                    out.half_width = f[2].parse().map_err(|_| bad("half_width"))?;
                    out.h = f[4].parse().map_err(|_| bad("h"))?;
                    out.n = f[6].parse().map_err(|_| bad("n"))?;
                }
                Some("times") => {
                    out.times = f[2..].iter().map(|v| v.parse().map_err(|_| bad("times"))).collect::<Result<_>>()?;
                }
                Some("model") if f.len() >= 4 => out.model_hash = f[3].to_string(),
                _ => {}
            }
        } else if !line.trim().is_empty() {
            out.values.push(line.trim().parse().map_err(|_| bad("value"))?);
        }
    }
    if out.values.len() != out.times.len() * out.n * out.n {
        return Err(bad("value count does not match header"));
    }
    Ok(out)
}
