//! Gauss rules, graded panels and a small adaptive integrator.

use std::f64::consts::PI;

/// Legendre polynomial P_n and its derivative at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Gauss-Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[n - 1 - i] = z;
        w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss-Lobatto nodes on [-1, 1] (endpoints included), ascending.
pub fn gauss_lobatto(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = n - 1;
    let mut x = vec![-1.0; n];
    x[m] = 1.0;
    for i in 1..m {
        // interior nodes are roots of P'_m
        let mut z = -(PI * i as f64 / m as f64).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, z);
            // P''_m from the Legendre ODE
            let d2p = (2.0 * z * dp - (m * (m + 1)) as f64 * p) / (1.0 - z * z);
            let dz = dp / d2p;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
    }
    x
}

/// A fixed quadrature rule: nodes and weights.
#[derive(Clone, Debug, Default)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn push_panel(&mut self, a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>)) {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, w) in gl.0.iter().zip(&gl.1) {
            self.nodes.push(c + r * x);
            self.weights.push(r * w);
        }
    }

    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Gauss panels on [a,b] with breakpoints geometrically graded toward `a`.
    pub fn graded(a: f64, b: f64, levels: usize, ratio: f64, order: usize) -> Rule {
        let gl = gauss_legendre(order);
        let mut rule = Rule::default();
        let mut edges = vec![b];
        let mut len = b - a;
        for _ in 0..levels {
            len /= ratio;
            edges.push(a + len);
        }
        edges.push(a);
        for k in (0..edges.len() - 1).rev() {
            rule.push_panel(edges[k + 1], edges[k], &gl);
        }
        rule
    }

    /// Graded toward both ends.
    pub fn graded_both(a: f64, b: f64, levels: usize, order: usize) -> Rule {
        let m = 0.5 * (a + b);
        let mut r = Rule::graded(a, m, levels, 2.0, order);
        let right = Rule::graded(m, b, levels, 2.0, order);
        for (x, w) in right.nodes.iter().zip(&right.weights) {
            r.nodes.push(m + b - x);
            r.weights.push(*w);
        }
        r
    }
}

/// Adaptive Gauss-Kronrod style integration (7/15 embedded via GL 7 vs GL 15 comparison).
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
    thread_local! {
        static RULES: ((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>)) = (gauss_legendre(7), gauss_legendre(15));
    }
    fn apply(f: &dyn Fn(f64) -> f64, a: f64, b: f64, g: &(Vec<f64>, Vec<f64>)) -> f64 {
        let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
        g.0.iter().zip(&g.1).map(|(x, w)| w * f(c + r * x)).sum::<f64>() * r
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize, whole: f64) -> f64 {
        let m = 0.5 * (a + b);
        let (l, r) = RULES.with(|g| (apply(f, a, m, &g.1), apply(f, m, b, &g.1)));
        if depth == 0 || (l + r - whole).abs() <= tol {
            return l + r;
        }
        let wl = l;
        let wr = r;
        rec(f, a, m, 0.5 * tol, depth - 1, wl) + rec(f, m, b, 0.5 * tol, depth - 1, wr)
    }
    let whole = RULES.with(|g| apply(f, a, b, &g.1));
    rec(f, a, b, tol, depth, whole)
}

/// Integral over [a, inf) through the map x = a + s/(1-s).
pub fn adaptive_semi_infinite(f: &dyn Fn(f64) -> f64, a: f64, tol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let x = a + s / (1.0 - s);
        f(x) / ((1.0 - s) * (1.0 - s))
    };
    adaptive(&g, 0.0, 1.0, tol, 40)
}

/// Barycentric Lagrange weights for arbitrary distinct nodes.
pub fn bary_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            1.0 / nodes
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != j)
                .map(|(_, xk)| nodes[j] - xk)
                .product::<f64>()
        })
        .collect()
}

/// Lagrange basis values at x (barycentric form, exact at nodes).
pub fn lagrange_basis(nodes: &[f64], bw: &[f64], x: f64, out: &mut [f64]) {
    if let Some(j) = nodes.iter().position(|&n| n == x) {
        out.iter_mut().for_each(|o| *o = 0.0);
        out[j] = 1.0;
        return;
    }
    let mut s = 0.0;
    for j in 0..nodes.len() {
        out[j] = bw[j] / (x - nodes[j]);
        s += out[j];
    }
    out.iter_mut().for_each(|o| *o /= s);
}

/// Least-squares line fit: returns (slope, intercept, slope standard error).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    let se = if x.len() > 2 { (rss / (n - 2.0) / sxx).sqrt() } else { f64::NAN };
    (slope, icpt, se)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn lobatto_has_endpoints_and_symmetry() {
        let x = gauss_lobatto(5);
        assert_eq!(x[0], -1.0);
        assert_eq!(x[4], 1.0);
        assert!((x[1] + x[3]).abs() < 1e-14);
        assert!((x[1] + (3.0f64 / 7.0).sqrt()).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_cauchy_tail() {
        let f = |x: f64| 1.0 / (1.0 + x * x);
        let v = adaptive_semi_infinite(&f, 0.0, 1e-12);
        assert!((v - PI / 2.0).abs() < 1e-9);
    }

    #[test]
    fn graded_rule_resolves_endpoint_singularity() {
        let r = Rule::graded(0.0, 1.0, 40, 2.0, 10);
        let v = r.integrate(|x| x.powf(-0.5));
        assert!((v - 2.0).abs() < 1e-6);
    }
}
