//! Problem data: intensity κ(x,z) = k₀(|z|) + a(x)k₁(|z|) and drift b.

use crate::base_kernels::family::Profile;
use crate::base_kernels::IsotropicKernelSpec;
use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ModelSpec {
    pub name: String,
    pub d: usize,
    pub k0: Profile,
    pub k1: Option<Profile>,
    pub a: ScalarFn,
    /// Range of a(x) over ℝ; frozen kernels are tabulated across it.
    pub a_range: (f64, f64),
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub beta: f64,
    pub b: ScalarFn,
    pub b_sup: f64,
    /// ‖b‖_{C^θ} seminorm bound.
    pub b_holder: f64,
    pub theta: f64,
    /// Unless false, b is treated as constant (enables exact q₀ ≡ 0 shortcuts).
    pub b_constant: bool,
    /// Spatial period of a and b, when they have one.
    pub period: Option<f64>,
}

impl std::fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelSpec")
            .field("name", &self.name)
            .field("kappa0", &self.kappa0)
            .field("kappa1", &self.kappa1)
            .field("kappa2", &self.kappa2)
            .field("beta", &self.beta)
            .field("b_sup", &self.b_sup)
            .field("theta", &self.theta)
            .finish()
    }
}

impl ModelSpec {
    pub fn kappa(&self, x: f64, z: f64) -> f64 {
        let r = z.abs();
        (self.k0.g)(r) + self.k1.as_ref().map_or(0.0, |k| (self.a)(x) * (k.g)(r))
    }

    pub fn a_at(&self, x: f64) -> f64 {
        if self.k1.is_some() {
            (self.a)(x)
        } else {
            0.0
        }
    }

    pub fn drift(&self, x: f64) -> f64 {
        (self.b)(x)
    }

    /// κ(x,·) − κ(y,·) and b(x) − b(y) both vanish identically.
    pub fn is_constant_coefficient(&self) -> bool {
        self.k1.is_none() && self.b_constant
    }

    /// κ frozen at x as an isotropic kernel spec.
    pub fn frozen_spec(&self, x: f64) -> IsotropicKernelSpec {
        let (k0, k1, a) = (self.k0.clone(), self.k1.clone(), self.a_at(x));
        let at_inf = k0.at_inf + k1.as_ref().map_or(0.0, |k| a * k.at_inf);
        IsotropicKernelSpec {
            d: 1,
            kappa_bar: Arc::new(move |z: &[f64]| {
                let r = z[0].abs();
                (k0.g)(r) + k1.as_ref().map_or(0.0, |k| a * (k.g)(r))
            }),
            kappa0_bar: self.kappa0,
            kappa1_bar: self.kappa1,
            kappa_inf: Some(at_inf),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d != 1 {
            return Err(Error::InvalidSpec(format!("parametrix models need d = 1, got d = {}", self.d)));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "beta = {} outside the (kappa2) range (0,1)",
                self.beta
            )));
        }
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidSpec(format!("theta = {} outside (0,1]", self.theta)));
        }
        if !(self.kappa0 > 0.0 && self.kappa0 <= self.kappa1) {
            return Err(Error::InvalidSpec("need 0 < kappa0 <= kappa1".into()));
        }
        let xs: Vec<f64> = (0..41).map(|i| -10.0 + 0.5 * i as f64 + 0.013 * i as f64).collect();
        let zs: Vec<f64> = (0..30).map(|k| 1e-3 * 1.5f64.powi(k)).collect();
        for &x in &xs {
            let a = self.a_at(x);
            if a < self.a_range.0 - 1e-12 || a > self.a_range.1 + 1e-12 {
                return Err(Error::InvalidSpec(format!("a({x}) = {a} outside declared a_range")));
            }
            let bx = self.drift(x);
            if bx.abs() > self.b_sup + 1e-12 {
                return Err(Error::InvalidSpec(format!("|b({x})| = {} exceeds b_sup", bx.abs())));
            }
            for &z in &zs {
                let k = self.kappa(x, z);
                if k < self.kappa0 - 1e-12 || k > self.kappa1 + 1e-12 {
                    return Err(Error::InvalidSpec(format!("kappa({x},{z}) = {k} violates (kappa) bounds")));
                }
                if (k - self.kappa(x, -z)).abs() > 1e-14 {
                    return Err(Error::InvalidSpec("kappa not symmetric in z".into()));
                }
            }
            for &dx in &[1e-3, 0.05, 0.4, 1.7] {
                let xp = x + dx;
                for &z in &zs {
                    let diff = (self.kappa(x, z) - self.kappa(xp, z)).abs();
                    if diff > self.kappa2 * dx.powf(self.beta) * (1.0 + 1e-9) {
                        return Err(Error::InvalidSpec(format!(
                            "(kappa2) Hölder bound fails at x = {x}, x' = {xp}: {diff:.3e}"
                        )));
                    }
                }
                let db = (bx - self.drift(xp)).abs();
                if db > self.b_holder * dx.powf(self.theta) * (1.0 + 1e-9) {
                    return Err(Error::InvalidSpec(format!("b Hölder bound fails at x = {x}, x' = {xp}")));
                }
            }
            if let Some(p) = self.period {
                if (self.a_at(x + p) - a).abs() > 1e-9 || (self.drift(x + p) - bx).abs() > 1e-9 {
                    return Err(Error::InvalidSpec(format!("coefficients not {p}-periodic at x = {x}")));
                }
            }
        }
        Ok(())
    }

    /// Fingerprint of the name, the declared constants and sampled coefficients.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        for v in [self.kappa0, self.kappa1, self.kappa2, self.beta, self.b_sup, self.b_holder, self.theta] {
            h.update(v.to_le_bytes());
        }
        for i in 0..64 {
            let x = -8.0 + 0.25 * i as f64 + 0.01;
            h.update(self.drift(x).to_le_bytes());
            for k in 0..8 {
                let z = 0.01 * 3f64.powi(k);
                h.update(self.kappa(x, z).to_le_bytes());
            }
        }
        let out = h.finalize();
        out.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// κ ≡ 1, b ≡ 0: every kernel is Cauchy with scale πt.
pub fn cauchy_constant() -> ModelSpec {
    ModelSpec {
        name: "cauchy-constant".into(),
        d: 1,
        k0: Profile::constant(1.0),
        k1: None,
        a: Arc::new(|_| 0.0),
        a_range: (0.0, 0.0),
        kappa0: 1.0,
        kappa1: 1.0,
        kappa2: 0.0,
        beta: 0.9,
        b: Arc::new(|_| 0.0),
        b_sup: 0.0,
        b_holder: 0.0,
        theta: 1.0,
        b_constant: true,
        period: None,
    }
}

/// κ(x,z) = 1 + ½ sin²(x) e^{−|z|}, b(x) = ½ cos x.
pub fn default_test() -> ModelSpec {
    ModelSpec {
        name: "default-test".into(),
        d: 1,
        k0: Profile::constant(1.0),
        k1: Some(Profile::new(|r| 0.5 * (-r).exp(), 0.0)),
        a: Arc::new(|x: f64| x.sin().powi(2)),
        a_range: (0.0, 1.0),
        kappa0: 1.0,
        kappa1: 1.5,
        // |∂_x ½sin²x| ≤ ½ and sin² takes values in [0,1], so |Δκ| ≤ ½ min(|Δx|, 1) ≤ ½|Δx|^β
        kappa2: 0.5,
        beta: 0.9,
        b: Arc::new(|x: f64| 0.5 * x.cos()),
        b_sup: 0.5,
        b_holder: 0.5,
        theta: 1.0,
        b_constant: false,
        period: Some(2.0 * std::f64::consts::PI),
    }
}

/// κ ≡ 1 with the Hölder drift b(x) = |sin x|^{0.6}.
pub fn holder_drift() -> ModelSpec {
    ModelSpec {
        name: "holder-drift".into(),
        b: Arc::new(|x: f64| x.sin().abs().powf(0.6)),
        b_sup: 1.0,
        b_holder: 1.0,
        theta: 0.6,
        b_constant: false,
        period: Some(std::f64::consts::PI),
        ..cauchy_constant()
    }
}

/// σ(x,z) = 1 + σ̃(x)(|z|^γ ∧ 1) with σ̃(x) = ¼(1 + cos x), γ = ½, over κ̄ ≡ 1.
pub fn kato_sigma() -> ModelSpec {
    ModelSpec {
        name: "kato-sigma".into(),
        k1: Some(Profile::new(|r: f64| r.sqrt().min(1.0), 1.0)),
        a: Arc::new(|x: f64| 0.25 * (1.0 + x.cos())),
        a_range: (0.0, 0.5),
        kappa1: 1.5,
        kappa2: 0.25,
        period: Some(2.0 * std::f64::consts::PI),
        ..cauchy_constant()
    }
}

pub fn preset(name: &str) -> Option<ModelSpec> {
    match name {
        "cauchy-constant" => Some(cauchy_constant()),
        "default-test" => Some(default_test()),
        "holder-drift" => Some(holder_drift()),
        "kato-sigma" => Some(kato_sigma()),
        _ => None,
    }
}

pub const PRESETS: [&str; 4] = ["cauchy-constant", "default-test", "holder-drift", "kato-sigma"];
