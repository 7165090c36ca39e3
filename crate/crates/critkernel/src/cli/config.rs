//! Experiment configuration: TOML with a few sections.
//!
//! ```toml
//! seed = 7                        # required; every random stream derives from it
//! out = "runs/cauchy"             # optional, --out overrides
//! experiments = ["assemble", "verify"]
//!
//! [model]
//! preset = "default-test"         # or give every coefficient inline, see ModelSection
//! beta = 0.8                      # any declared constant may override the preset
//!
//! [grid]                          # parametrix lattice; defaults as in ParametrixConfig
//! h = 0.0625
//!
//! [verify]
//! bounds = ["p0", "eq16", "eq17"]
//! ```

use super::expr::parse_field;
use crate::base_kernels::family::Profile;
use crate::error::{Error, Result};
use crate::parametrix::{preset, ModelSpec, ParametrixConfig};
use crate::sde_sim::{kato_norm, KatoClass, KatoFunction};
use crate::verifiers::BOUND_IDS;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Assemble,
    Verify,
    Zvonkin,
    Simulate,
    Compare,
    Uniqueness,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Assemble => "assemble",
            Experiment::Verify => "verify",
            Experiment::Zvonkin => "zvonkin",
            Experiment::Simulate => "simulate",
            Experiment::Compare => "compare",
            Experiment::Uniqueness => "uniqueness",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default)]
    pub out: Option<String>,
    pub experiments: Vec<Experiment>,
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub assemble: AssembleSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub zvonkin: ZvonkinSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub compare: CompareSection,
    #[serde(default)]
    pub uniqueness: UniquenessSection,
}

/// A preset, optionally with overrides, or a fully inline model.
/// Inline profiles k0, k1 are expressions in `r` = |z|; a and b are expressions in `x`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub k0: Option<String>,
    /// lim_{r→∞} k0(r); needed when k0 is not constant.
    pub k0_inf: Option<f64>,
    pub k1: Option<String>,
    pub k1_inf: Option<f64>,
    pub a: Option<String>,
    pub a_range: Option<[f64; 2]>,
    pub b: Option<String>,
    pub kappa0: Option<f64>,
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub beta: Option<f64>,
    pub theta: Option<f64>,
    pub b_sup: Option<f64>,
    pub b_holder: Option<f64>,
    pub period: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub horizon: Option<f64>,
    pub panels: Option<usize>,
    pub per_panel: Option<usize>,
    pub half_width: Option<f64>,
    pub h: Option<f64>,
    pub max_order: Option<usize>,
    pub tail_rel: Option<f64>,
    pub quad_tol: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Jumps below eps are dropped.
    pub eps: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { eps: 0.01 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssembleSection {
    /// Starting point of the rows p(t, x0, ·) written to p_rows.csv.
    pub x0: f64,
    /// Also dump every node value (large).
    pub write_table: bool,
}

impl Default for AssembleSection {
    fn default() -> Self {
        Self { x0: 0.0, write_table: false }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    /// Bound ids; all of them when absent.
    pub bounds: Option<Vec<String>>,
    /// Hölder exponents ϑ for the (f2) report, as fractions of β.
    pub holder_fractions: Vec<f64>,
    /// Fit the time-scaling exponents as well.
    pub exponents: bool,
    /// Largest accepted refinement drift; --tolerance overrides.
    pub threshold: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self { bounds: None, holder_fractions: vec![0.5, 0.75], exponents: true, threshold: 0.25 }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ZvonkinSection {
    /// Fixed λ; auto-selected when absent.
    pub lambda: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateSection {
    pub x0: f64,
    pub horizon: f64,
    pub dt: f64,
    pub paths: usize,
    /// Write every mesh path to trajectories.csv.
    pub record: bool,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { x0: 0.0, horizon: 0.5, dt: 1.0 / 64.0, paths: 10_000, record: false }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareSection {}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniquenessSection {
    pub x0: f64,
    pub horizon: f64,
    /// Mesh widths 2^-k for k in the inclusive range.
    pub levels: [u32; 2],
    pub paths: usize,
    /// Paths of the Zvonkin coupled run; 0 skips it.
    pub coupled_paths: usize,
    pub coupled_dt: f64,
    /// Jump floor of the coupled run.
    pub coupled_eps: f64,
}

impl Default for UniquenessSection {
    fn default() -> Self {
        Self { x0: 0.3, horizon: 1.0, levels: [9, 12], paths: 1000, coupled_paths: 0, coupled_dt: 1.0 / 16.0, coupled_eps: 0.1 }
    }
}

fn field_err(field: &str, msg: impl Into<String>) -> Error {
    Error::Config { field: field.into(), msg: msg.into() }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            // the first offending key is in the message for unknown fields; otherwise
            // report the line
            let field = match e.span() {
                Some(sp) => {
                    let line = text[..sp.start.min(text.len())].matches('\n').count() + 1;
                    format!("line {line}")
                }
                None => "config".into(),
            };
            field_err(&field, msg)
        })
    }

    pub fn parametrix(&self) -> Result<ParametrixConfig> {
        let g = &self.grid;
        let d = ParametrixConfig::default();
        let cfg = ParametrixConfig {
            horizon: g.horizon.unwrap_or(d.horizon),
            panels: g.panels.unwrap_or(d.panels),
            per_panel: g.per_panel.unwrap_or(d.per_panel),
            half_width: g.half_width.unwrap_or(d.half_width),
            h: g.h.unwrap_or(d.h),
            max_order: g.max_order.unwrap_or(d.max_order),
            tail_rel: g.tail_rel.unwrap_or(d.tail_rel),
            quad_tol: g.quad_tol.unwrap_or(d.quad_tol),
        };
        cfg.validate().map_err(|e| match e {
            Error::Config { field, msg } => field_err(&format!("grid.{field}"), msg),
            other => other,
        })?;
        Ok(cfg)
    }

    /// Checks every section; the first failure names its field.
    pub fn validate(&self) -> Result<(ModelSpec, ParametrixConfig)> {
        if self.experiments.is_empty() {
            return Err(field_err("experiments", "empty experiment list"));
        }
        let model = self.model.build()?;
        let cfg = self.parametrix()?;
        if !(self.noise.eps > 0.0 && self.noise.eps < 1.0) {
            return Err(field_err("noise.eps", format!("{} outside (0,1)", self.noise.eps)));
        }
        if let Some(ids) = &self.verify.bounds {
            if let Some(bad) = ids.iter().find(|id| !BOUND_IDS.contains(&id.as_str())) {
                return Err(field_err("verify.bounds", format!("unknown bound id `{bad}`")));
            }
        }
        if self.verify.holder_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return Err(field_err("verify.holder_fractions", "fractions of beta must lie in (0,1)"));
        }
        if !(self.verify.threshold > 0.0) {
            return Err(field_err("verify.threshold", "must be positive"));
        }
        if let Some(l) = self.zvonkin.lambda {
            if !(l > 0.0) {
                return Err(field_err("zvonkin.lambda", "must be positive"));
            }
        }
        let s = &self.simulate;
        if !(s.horizon > 0.0 && s.horizon <= cfg.horizon) {
            return Err(field_err("simulate.horizon", format!("{} outside (0, grid.horizon]", s.horizon)));
        }
        if !(s.dt > 0.0 && s.dt <= s.horizon) || ((s.horizon / s.dt).round() * s.dt - s.horizon).abs() > 1e-12 {
            return Err(field_err("simulate.dt", "must be positive and divide the horizon"));
        }
        if s.paths == 0 {
            return Err(field_err("simulate.paths", "must be positive"));
        }
        let u = &self.uniqueness;
        if u.levels[0] >= u.levels[1] || u.levels[1] > 20 {
            return Err(field_err("uniqueness.levels", "need k0 < k1 <= 20"));
        }
        if !(u.horizon > 0.0) || u.paths == 0 {
            return Err(field_err("uniqueness", "horizon and paths must be positive"));
        }
        if u.coupled_paths > 0 && (!(u.coupled_dt > 0.0) || !(u.coupled_eps > 0.0 && u.coupled_eps < 1.0)) {
            return Err(field_err("uniqueness.coupled_dt", "coupled run needs dt > 0 and eps in (0,1)"));
        }
        Ok((model, cfg))
    }
}

impl ModelSection {
    pub fn build(&self) -> Result<ModelSpec> {
        let mut m = match &self.preset {
            Some(p) => preset(p).ok_or_else(|| field_err("model.preset", format!("unknown preset `{p}`")))?,
            None => {
                let need = |v: Option<f64>, f: &str| v.ok_or_else(|| field_err(&format!("model.{f}"), "required for an inline model"));
                if self.k0.is_none() {
                    return Err(field_err("model.k0", "required for an inline model"));
                }
                let mut m = crate::parametrix::model::cauchy_constant();
                m.name = "inline".into();
                m.kappa0 = need(self.kappa0, "kappa0")?;
                m.kappa1 = need(self.kappa1, "kappa1")?;
                m.beta = need(self.beta, "beta")?;
                m
            }
        };
        if let Some(n) = &self.name {
            m.name = n.clone();
        }
        for (v, f) in [(self.beta, "beta"), (self.theta, "theta")] {
            if let Some(v) = v {
                let ok = if f == "beta" { v > 0.0 && v < 1.0 } else { v > 0.0 && v <= 1.0 };
                if !ok {
                    let range = if f == "beta" { "the (kappa2) range (0,1)" } else { "(0,1]" };
                    return Err(field_err(&format!("model.{f}"), format!("{v} outside {range}")));
                }
            }
        }
        if let Some(src) = &self.k0 {
            let e = parse_field(src, "r", "model.k0")?;
            let at_inf = match self.k0_inf {
                Some(v) => v,
                None if e.is_constant() => e.eval(0.0),
                None => return Err(field_err("model.k0_inf", "required when k0 depends on r")),
            };
            m.k0 = Profile::new(move |r| e.eval(r), at_inf);
        }
        if let Some(src) = &self.k1 {
            let e = parse_field(src, "r", "model.k1")?;
            let at_inf = match self.k1_inf {
                Some(v) => v,
                None if e.is_constant() => e.eval(0.0),
                None => return Err(field_err("model.k1_inf", "required when k1 depends on r")),
            };
            m.k1 = Some(Profile::new(move |r| e.eval(r), at_inf));
            if self.a.is_none() && self.preset.is_none() {
                return Err(field_err("model.a", "required with k1"));
            }
        }
        if let Some(src) = &self.a {
            let e = parse_field(src, "x", "model.a")?;
            m.a = Arc::new(move |x| e.eval(x));
            m.a_range = match self.a_range {
                Some(r) => (r[0], r[1]),
                None => return Err(field_err("model.a_range", "required with a")),
            };
        }
        if let Some(src) = &self.b {
            let e = parse_field(src, "x", "model.b")?;
            m.b_constant = e.is_constant();
            m.b_sup = match self.b_sup {
                Some(v) => v,
                None if m.b_constant => e.eval(0.0).abs(),
                None => return Err(field_err("model.b_sup", "required when b depends on x")),
            };
            m.b_holder = match self.b_holder {
                Some(v) => v,
                None if m.b_constant => 0.0,
                None => return Err(field_err("model.b_holder", "required when b depends on x")),
            };
            m.b = Arc::new(move |x| e.eval(x));
        }
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { m.$f = v; } )* };
        }
        set!(kappa0, kappa1, kappa2, beta, theta, b_sup, b_holder);
        if self.period.is_some() {
            m.period = self.period;
        } else if self.preset.is_none() || self.a.is_some() || self.b.is_some() {
            // inline coefficients carry no period unless declared
            m.period = None;
        }
        m.validate().map_err(|e| field_err("model", e.to_string()))?;
        Ok(m)
    }
}

/// The weight h of condition (Hσ) declared by a preset, if any, with its Kato norm at T = 1.
pub fn preset_kato_weight(name: &str) -> Option<(KatoFunction, f64)> {
    match name {
        // |σ(x,z) − σ(y,z)| ≤ |σ̃(x) − σ̃(y)| ≤ ¼|x − y| = |x − y|(h(x) + h(y)) with h ≡ 1/8
        "kato-sigma" => {
            let h = KatoFunction { class: KatoClass::Bounded, ..KatoFunction::constant(0.125) };
            let k = kato_norm(&h, 1.0, &[-1.0, 0.0, 0.5, 2.0]);
            Some((h, k))
        }
        _ => None,
    }
}

pub fn preset_description(name: &str) -> &'static str {
    match name {
        "cauchy-constant" => "kappa = 1, b = 0; every kernel is the Cauchy density of scale pi t",
        "default-test" => "kappa(x,z) = 1 + sin^2(x) exp(-|z|)/2, b(x) = cos(x)/2, beta = 0.9",
        "holder-drift" => "kappa = 1, b(x) = |sin x|^0.6 (theta = 0.6)",
        "kato-sigma" => "sigma(x,z) = 1 + (1 + cos x)min(|z|^(1/2), 1)/4 over kbar = 1",
        _ => "",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
seed = 1
experiments = ["assemble", "verify"]
[model]
preset = "cauchy-constant"
"#;

    #[test]
    fn minimal_config_validates() {
        let c = ExperimentConfig::parse(MINIMAL).unwrap();
        let (m, cfg) = c.validate().unwrap();
        assert_eq!(m.name, "cauchy-constant");
        assert_eq!(cfg, ParametrixConfig::default());
    }

    #[test]
    fn beta_out_of_range_names_the_field() {
        let c = ExperimentConfig::parse(&format!("{MINIMAL}beta = 1.5\n")).unwrap();
        match c.validate() {
            Err(Error::Config { field, msg }) => {
                assert_eq!(field, "model.beta");
                assert!(msg.contains("(kappa2) range (0,1)"), "{msg}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_experiments_are_rejected() {
        assert!(ExperimentConfig::parse(&format!("{MINIMAL}bogus = 1\n")).is_err());
        assert!(ExperimentConfig::parse("seed = 1\nexperiments = [\"dance\"]\n[model]\npreset = \"x\"\n").is_err());
        assert!(ExperimentConfig::parse("experiments = []\n[model]\n").is_err());
    }

    #[test]
    fn inline_model_matches_the_preset() {
        let text = r#"
seed = 1
experiments = ["assemble"]
[model]
k0 = "1"
k1 = "0.5*exp(-r)"
k1_inf = 0
a = "sin(x)^2"
a_range = [0, 1]
b = "0.5*cos(x)"
b_sup = 0.5
b_holder = 0.5
kappa0 = 1
kappa1 = 1.5
kappa2 = 0.5
beta = 0.9
period = 6.283185307179586
"#;
        let m = ExperimentConfig::parse(text).unwrap().validate().unwrap().0;
        let d = preset("default-test").unwrap();
        for &(x, z) in &[(0.3, 0.1), (-2.0, 3.0), (5.0, 0.01)] {
            assert!((m.kappa(x, z) - d.kappa(x, z)).abs() < 1e-15);
            assert!((m.drift(x) - d.drift(x)).abs() < 1e-15);
        }
        assert!(!m.b_constant);
    }

    #[test]
    fn kato_sigma_weight_is_finite() {
        let (h, k) = preset_kato_weight("kato-sigma").unwrap();
        assert_eq!(h.class, KatoClass::Bounded);
        assert!((k - 0.5).abs() < 1e-8, "{k}");
        assert!(preset_kato_weight("cauchy-constant").is_none());
    }
}
