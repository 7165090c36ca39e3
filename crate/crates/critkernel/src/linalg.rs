//! Dense row-major square matrices with a GEMM wrapper.

#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    pub n: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] += v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// self += alpha * other
    pub fn axpy(&mut self, alpha: f64, other: &Mat) {
        if alpha == 0.0 {
            return;
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    /// self += a · b
    pub fn gemm_acc(&mut self, a: &Mat, b: &Mat) {
        let n = self.n;
        assert!(a.n == n && b.n == n);
        unsafe {
            matrixmultiply::dgemm(
                n,
                n,
                n,
                1.0,
                a.data.as_ptr(),
                n as isize,
                1,
                b.data.as_ptr(),
                n as isize,
                1,
                1.0,
                self.data.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Linear combination Σ c_k M_k over the nonzero coefficients.
    pub fn combine<'a>(n: usize, terms: impl IntoIterator<Item = (f64, &'a Mat)>) -> Mat {
        let mut out = Mat::zeros(n);
        for (c, m) in terms {
            out.axpy(c, m);
        }
        out
    }
}
