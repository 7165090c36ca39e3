//! Orchestration of an experiment list and its artifacts.

use super::config::{preset_kato_weight, Experiment, ExperimentConfig};
use crate::error::{Error, Result};
use crate::parametrix::{ModelSpec, ParametrixConfig};
use crate::resolvent::{pide_residual, transformed_coeffs};
use crate::sde_sim::{
    compare_density, density_estimate, pathwise_uniqueness_experiment, simulate_model, write_trajectories_csv,
    zvonkin_coupled_run, Bandwidth, LevyNoiseSpec, PathEnsemble, SdeCoeffs, MIN_PATHS,
};
use crate::verifiers::{
    holder_report, scaling_exponent, summary_table, verify_bound, Artifacts, BoundReport, ScalingQuantity, Stage,
    VerifyContext, BOUND_IDS,
};
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

/// Command line overrides.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub tolerance: Option<f64>,
}

#[derive(Debug)]
pub enum RunError {
    /// Exit code 2.
    Validation(Error),
    /// Exit code 3; partial artifacts are kept next to a FAILED marker.
    Runtime(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Validation(_) => 2,
            RunError::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Validation(e) => write!(f, "validation failed: {e}"),
            RunError::Runtime(e) => write!(f, "run failed: {e}"),
        }
    }
}

/// Requested experiments plus their prerequisites, in execution order.
pub fn execution_order(cfg: &ExperimentConfig) -> Vec<Experiment> {
    let mut set: Vec<Experiment> = cfg.experiments.clone();
    let add = |e: Experiment, set: &mut Vec<Experiment>| {
        if !set.contains(&e) {
            set.push(e);
        }
    };
    let requested = set.clone();
    for e in requested {
        match e {
            Experiment::Verify | Experiment::Zvonkin => add(Experiment::Assemble, &mut set),
            Experiment::Compare => {
                add(Experiment::Assemble, &mut set);
                add(Experiment::Simulate, &mut set);
            }
            Experiment::Uniqueness if cfg.uniqueness.coupled_paths > 0 => {
                add(Experiment::Assemble, &mut set);
                add(Experiment::Zvonkin, &mut set);
            }
            _ => {}
        }
    }
    set.sort();
    set
}

/// Parses and validates without running; the model and lattice on success.
pub fn validate_text(text: &str, opts: &RunOptions) -> std::result::Result<(ExperimentConfig, ModelSpec, ParametrixConfig), Error> {
    let cfg = ExperimentConfig::parse(text)?;
    let (model, pcfg) = cfg.validate()?;
    if let Some(w) = opts.workers {
        if w == 0 {
            return Err(Error::Config { field: "--workers".into(), msg: "must be at least 1".into() });
        }
    }
    if let Some(t) = opts.tolerance {
        if !(t > 0.0) {
            return Err(Error::Config { field: "--tolerance".into(), msg: "must be positive".into() });
        }
    }
    if let Some(p) = &cfg.model.preset {
        if let Some((_, k)) = preset_kato_weight(p) {
            if !k.is_finite() {
                return Err(Error::Config { field: "model.preset".into(), msg: format!("Kato norm of the declared h is {k}") });
            }
        }
    }
    Ok((cfg, model, pcfg))
}

struct Runner<'a> {
    cfg: &'a ExperimentConfig,
    model: ModelSpec,
    pcfg: ParametrixConfig,
    out: PathBuf,
    seed: u64,
    threshold: f64,
    base: Option<Artifacts>,
    ctx: Option<VerifyContext>,
    ensemble: Option<PathEnsemble>,
    files: Vec<String>,
}

pub struct RunSummary {
    pub out: PathBuf,
    pub executed: Vec<Experiment>,
    pub files: Vec<String>,
    /// Verify reports, when the verify experiment ran.
    pub reports: Vec<BoundReport>,
}

pub fn run_text(text: &str, opts: &RunOptions) -> std::result::Result<RunSummary, RunError> {
    let (cfg, model, pcfg) = validate_text(text, opts).map_err(RunError::Validation)?;
    let out = opts.out.clone().or_else(|| cfg.out.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("critkernel-out"));
    fs::create_dir_all(&out).map_err(|e| RunError::Runtime(e.into()))?;
    let _ = fs::remove_file(out.join("FAILED"));
    let order = execution_order(&cfg);
    let mut r = Runner {
        cfg: &cfg,
        model,
        pcfg,
        out: out.clone(),
        seed: opts.seed.unwrap_or(cfg.seed),
        threshold: opts.tolerance.unwrap_or(cfg.verify.threshold),
        base: None,
        ctx: None,
        ensemble: None,
        files: Vec::new(),
    };
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut wall = BTreeMap::new();
    let mut reports = Vec::new();
    let mut failure = None;
    for &e in &order {
        let t0 = Instant::now();
        let res = match e {
            Experiment::Assemble => r.assemble(),
            Experiment::Verify => r.verify().map(|v| reports = v),
            Experiment::Zvonkin => r.zvonkin(),
            Experiment::Simulate => r.simulate(),
            Experiment::Compare => r.compare(),
            Experiment::Uniqueness => r.uniqueness(),
        };
        wall.insert(e.name(), t0.elapsed().as_secs_f64());
        if let Err(err) = res {
            failure = Some((e, err));
            break;
        }
    }
    let manifest = json!({
        "config_sha256": hex_digest(text.as_bytes()),
        "versions": {
            "critkernel": env!("CARGO_PKG_VERSION"),
            "kernel_table_format": "critkernel kernel table v1",
            "zvonkin_map_format": "critkernel zvonkin map v1",
        },
        "model": r.model.name,
        "model_hash": r.model.hash(),
        "seed": r.seed,
        "workers": opts.workers.unwrap_or(1),
        "drift_threshold": r.threshold,
        "requested": cfg.experiments.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "executed": order.iter().map(|e| e.name()).collect::<Vec<_>>(),
        "files": r.files,
        "status": if failure.is_some() { "failed" } else { "ok" },
        "started_unix": started,
        "wall_seconds": wall,
    });
    let write_manifest = || -> Result<()> {
        fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest).unwrap() + "\n")?;
        Ok(())
    };
    if let Some((e, err)) = failure {
        let _ = write_manifest();
        let _ = fs::write(out.join("FAILED"), format!("experiment {} failed: {err}\n", e.name()));
        return Err(RunError::Runtime(err));
    }
    write_manifest().map_err(RunError::Runtime)?;
    Ok(RunSummary { out, executed: order, files: r.files, reports })
}

pub fn run_file(path: &Path, opts: &RunOptions) -> std::result::Result<RunSummary, RunError> {
    let text = fs::read_to_string(path)
        .map_err(|e| RunError::Validation(Error::Config { field: "--config".into(), msg: format!("{}: {e}", path.display()) }))?;
    run_text(&text, opts)
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Runner<'_> {
    fn file(&mut self, name: &str) -> Result<BufWriter<fs::File>> {
        self.files.push(name.into());
        Ok(BufWriter::new(fs::File::create(self.out.join(name))?))
    }

    fn json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut w = self.file(name)?;
        serde_json::to_writer_pretty(&mut w, v).map_err(|e| Error::Io(e.into()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn artifacts(&self) -> Result<&Artifacts> {
        self.base
            .as_ref()
            .or(self.ctx.as_ref().map(|c| &c.base))
            .ok_or_else(|| Error::Dependency { module: "parametrix", what: "kernel table (assemble did not run)".into() })
    }

    fn verify_stage(&self) -> Stage {
        let ids = self.bound_ids();
        if ids.iter().any(|id| matches!(id.as_str(), "upd" | "b" | "g")) {
            Stage::Zvonkin
        } else if ids.iter().any(|id| id == "es2") {
            Stage::Resolvent
        } else {
            Stage::Kernel
        }
    }

    fn bound_ids(&self) -> Vec<String> {
        self.cfg.verify.bounds.clone().unwrap_or_else(|| BOUND_IDS.iter().map(|s| s.to_string()).collect())
    }

    fn assemble(&mut self) -> Result<()> {
        let art = Artifacts::build(&self.model, &self.pcfg, Stage::Kernel, None, self.cfg.noise.eps)?;
        let table = art.table.as_ref().unwrap();
        let lat = &table.lattice;
        let n = lat.space.n;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        // rows away from the window edge
        let interior: Vec<usize> = (0..n).filter(|&j| lat.space.x(j).abs() <= 0.5 * lat.space.half_width).collect();
        for i in 0..lat.time.len() {
            for &j in &interior {
                let s = table.row_sum(i, j);
                lo = lo.min(s);
                hi = hi.max(s);
            }
        }
        let summary = json!({
            "model": self.model.name,
            "model_hash": table.model_hash,
            "order": table.order,
            "tail_bound": table.tail_bound,
            "tolerance": table.tolerance,
            "min_node_value": table.min_value,
            "clamped_fraction": table.clamped_fraction,
            "interior_row_sum_range": [lo, hi],
            "space": {"half_width": lat.space.half_width, "h": lat.space.h, "n": n},
            "times": lat.time.nodes,
        });
        self.json("assemble.json", &summary)?;

        let x0 = self.cfg.assemble.x0;
        let times: Vec<f64> = (1..=6).rev().map(|k| lat.time.horizon * 0.5f64.powi(k - 1)).filter(|t| *t >= lat.time.t_min()).collect();
        let ys: Vec<f64> = (0..n).map(|k| lat.space.x(k)).collect();
        let mut w = self.file("p_rows.csv")?;
        writeln!(w, "t,x,y,p,grad_x_p")?;
        for &t in &times {
            for &y in &ys {
                writeln!(w, "{t:.17e},{x0:.17e},{y:.17e},{:.17e},{:.17e}", table.p(t, x0, y)?, table.grad(t, x0, y)?)?;
            }
        }
        w.flush()?;
        if self.cfg.assemble.write_table {
            let mut w = self.file("kernel_table.txt")?;
            table.write_text(&mut w)?;
            w.flush()?;
        }
        self.base = Some(art);
        Ok(())
    }

    fn verify(&mut self) -> Result<Vec<BoundReport>> {
        let stage = self.verify_stage();
        let base = self.base.take().ok_or_else(|| Error::Dependency { module: "parametrix", what: "kernel table".into() })?;
        let mut ctx = VerifyContext::from_base(&self.model, base, &self.pcfg, stage, self.cfg.noise.eps)?;
        ctx.threshold = self.threshold;
        ctx.seed = self.seed;
        if let Some(p) = &self.cfg.model.preset {
            if let Some((h, _)) = preset_kato_weight(p) {
                ctx.kato_h = h;
            }
        }
        let mut reports = Vec::new();
        for id in self.bound_ids() {
            reports.push(verify_bound(&id, &ctx)?);
        }
        let mut holder = Vec::new();
        for f in &self.cfg.verify.holder_fractions {
            holder.push(holder_report(&ctx, f * self.model.beta)?);
        }
        self.json("bounds.json", &reports)?;
        let mut all = reports.clone();
        all.extend(holder.iter().cloned());
        let mut w = self.file("bounds.txt")?;
        w.write_all(summary_table(&all).as_bytes())?;
        w.flush()?;
        self.json("holder.json", &holder)?;
        if self.cfg.verify.exponents {
            let ts: Vec<f64> = (1..=6).rev().map(|k| 0.5f64.powi(k)).filter(|t| *t <= self.pcfg.horizon).collect();
            let mut fits = BTreeMap::new();
            fits.insert("on_diagonal", scaling_exponent(&ctx, ScalingQuantity::OnDiagonal { y: 0.3 }, &ts)?);
            fits.insert("grad_sup", scaling_exponent(&ctx, ScalingQuantity::GradSup { y: 0.3 }, &ts)?);
            if stage >= Stage::Resolvent && self.model.b_sup > 0.0 {
                fits.insert("resolvent_gradient", scaling_exponent(&ctx, ScalingQuantity::ResolventGradient, &[1.0, 2.0, 4.0, 8.0, 16.0])?);
            }
            self.json("exponents.json", &fits)?;
        }
        self.ctx = Some(ctx);
        Ok(reports)
    }

    fn zvonkin(&mut self) -> Result<()> {
        let lambda = self.cfg.zvonkin.lambda;
        let eps = self.cfg.noise.eps;
        let model = self.model.clone();
        if lambda.is_some() && self.ctx.is_some() {
            // a fixed λ differs from the one verify selected
            self.base = Some(Artifacts::build(&model, &self.pcfg, Stage::Kernel, None, eps)?);
        }
        let art = match (&mut self.base, &mut self.ctx) {
            (Some(b), _) => b,
            (None, Some(c)) => &mut c.base,
            (None, None) => return Err(Error::Dependency { module: "parametrix", what: "kernel table".into() }),
        };
        art.extend(&model, Stage::Zvonkin, lambda, eps)?;
        let sol = art.solution.clone().unwrap();
        let map = art.map.clone().unwrap();
        let probe = map.probe(100, self.seed, 6.0)?;
        let mut worst = 0.0f64;
        for k in 0..10 {
            let x = -4.5 + k as f64;
            worst = worst.max(pide_residual(&sol, &model, x)?.residual);
        }
        let summary = json!({
            "lambda": sol.lambda,
            "doublings": sol.doublings,
            "u_sup": sol.u_sup,
            "grad_sup": sol.grad_sup,
            "es2": sol.es2(),
            "tail_budget": sol.tail_budget,
            "pide_residual_max": worst,
            "b_sup": model.b_sup,
            "round_trip": probe.round_trip,
            "lipschitz_range": [probe.lip_min, probe.lip_max],
            "model_hash": sol.model_hash,
        });
        self.json("zvonkin.json", &summary)?;
        let mut w = self.file("zvonkin_map.txt")?;
        map.write_text(&mut w)?;
        w.flush()?;
        Ok(())
    }

    fn simulate(&mut self) -> Result<()> {
        let s = &self.cfg.simulate;
        let spec = LevyNoiseSpec::for_model(&self.model, self.cfg.noise.eps);
        let mut ens = simulate_model(&self.model, &spec, s.x0, s.horizon, s.dt, s.paths, self.seed)?;
        if s.record {
            let c = SdeCoeffs::from_model(&self.model, &spec);
            let rec = crate::sde_sim::simulate_ensemble(s.x0, &c, &spec, s.horizon, s.dt, s.paths, self.seed, true)?;
            ens.paths = rec.paths;
            let mut w = self.file("trajectories.csv")?;
            write_trajectories_csv(&ens, &mut w)?;
            w.flush()?;
        }
        let mut w = self.file("finals.csv")?;
        writeln!(w, "path_id,x_1")?;
        for (i, x) in ens.finals.iter().enumerate() {
            writeln!(w, "{i},{x:.17e}")?;
        }
        w.flush()?;
        let n = ens.finals.len() as f64;
        let mean = ens.finals.iter().sum::<f64>() / n;
        let mut sorted = ens.finals.clone();
        sorted.sort_by(f64::total_cmp);
        let median = sorted[sorted.len() / 2];
        if ens.count >= MIN_PATHS {
            let xs: Vec<f64> = (-64..=64).map(|k| s.x0 + k as f64 / 16.0).collect();
            let kde = density_estimate(&ens.finals, &xs, Bandwidth::Silverman)?;
            let mut w = self.file("density.csv")?;
            kde.write_csv(&mut w)?;
            w.flush()?;
        }
        let summary = json!({
            "x0": s.x0, "horizon": s.horizon, "dt": s.dt, "paths": ens.count, "eps": ens.eps,
            "seed": ens.seed, "mean": mean, "median": median, "integrator": ens.integrator,
            "model_hash": ens.model_hash, "truncation_budget": spec.truncation_budget(s.horizon),
        });
        self.json("simulate.json", &summary)?;
        ens.paths.clear();
        self.ensemble = Some(ens);
        Ok(())
    }

    fn compare(&mut self) -> Result<()> {
        let ens = self.ensemble.as_ref().ok_or_else(|| Error::Dependency { module: "sde_sim", what: "path ensemble".into() })?;
        let table = self.artifacts()?.table.as_ref().unwrap();
        let cmp = compare_density(ens, table, ens.horizon)?;
        self.json("compare.json", &cmp)
    }

    fn uniqueness(&mut self) -> Result<()> {
        let u = &self.cfg.uniqueness;
        let spec = LevyNoiseSpec::for_model(&self.model, self.cfg.noise.eps);
        let coeffs = SdeCoeffs::from_model(&self.model, &spec);
        let dts: Vec<f64> = (u.levels[0]..=u.levels[1]).map(|k| 0.5f64.powi(k as i32)).collect();
        let table = pathwise_uniqueness_experiment(&coeffs, &spec, u.x0, u.horizon, &dts, u.paths, self.seed)?;
        let mut out = json!({
            "dts": table.dts, "errors": table.errors, "std_errs": table.std_errs,
            "paths": table.paths, "seed": table.seed, "strictly_decreasing": table.strictly_decreasing(),
        });
        if u.coupled_paths > 0 {
            let map = self.artifacts()?.map.clone().ok_or_else(|| Error::Dependency { module: "resolvent", what: "Zvonkin map".into() })?;
            let cspec = LevyNoiseSpec::for_model(&self.model, u.coupled_eps);
            let tc = Arc::new(transformed_coeffs(map.clone(), &self.model, &cspec)?);
            let yc = SdeCoeffs::zvonkin(tc);
            let rep = zvonkin_coupled_run(&self.model, &map, &yc, &cspec, u.x0, u.horizon, u.coupled_dt, u.coupled_paths, self.seed)?;
            out["coupled"] = serde_json::to_value(rep).unwrap();
            out["coupled_within_3x_baseline"] = json!(rep.distance <= 3.0 * rep.baseline);
        }
        self.json("uniqueness.json", &out)
    }
}
