//! Natural cubic spline on a uniform grid.

#[derive(Clone, Debug)]
pub struct UniformSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl UniformSpline {
    pub fn new(x0: f64, h: f64, y: Vec<f64>) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives (Thomas algorithm)
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
                if i == 0 {
                    c[i] = 1.0 / 4.0;
                    d[i] = rhs / 4.0;
                } else {
                    let den = 4.0 - c[i - 1];
                    c[i] = 1.0 / den;
                    d[i] = (rhs - d[i - 1]) / den;
                }
            }
            m[k] = d[k - 1];
            for i in (0..k - 1).rev() {
                m[i + 1] = d[i] - c[i] * m[i + 2];
            }
        }
        Self { x0, h, y, m }
    }

    fn cell(&self, x: f64) -> Option<(usize, f64)> {
        let u = (x - self.x0) / self.h;
        let n = self.y.len();
        if u < 0.0 || u > (n - 1) as f64 {
            return None;
        }
        let i = (u.floor() as usize).min(n - 2);
        Some((i, u - i as f64))
    }

    /// Value; zero outside the grid.
    pub fn eval(&self, x: f64) -> f64 {
        let Some((i, f)) = self.cell(x) else { return 0.0 };
        let g = 1.0 - f;
        let h2 = self.h * self.h / 6.0;
        g * self.y[i] + f * self.y[i + 1] + h2 * ((g * g * g - g) * self.m[i] + (f * f * f - f) * self.m[i + 1])
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let Some((i, f)) = self.cell(x) else { return 0.0 };
        let g = 1.0 - f;
        (self.y[i + 1] - self.y[i]) / self.h
            + self.h / 6.0 * ((1.0 - 3.0 * g * g) * self.m[i] + (3.0 * f * f - 1.0) * self.m[i + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_smooth_function() {
        let h = 0.05;
        let y: Vec<f64> = (0..201).map(|i| (-5.0 + h * i as f64).sin()).collect();
        let s = UniformSpline::new(-5.0, h, y);
        for &x in &[-3.3, 0.01, 2.77] {
            assert!((s.eval(x) - f64::sin(x)).abs() < 1e-5);
            assert!((s.deriv(x) - f64::cos(x)).abs() < 1e-3);
        }
        assert_eq!(s.eval(6.0), 0.0);
    }
}
