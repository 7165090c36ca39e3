use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_critkernel"))
}

fn run(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    fs::write(&cfg, config).unwrap();
    bin().arg("run").arg("--config").arg(&cfg).arg("--out").arg(dir.join("out")).args(extra).output().unwrap()
}

const MINIMAL: &str = r#"
seed = 11
experiments = ["assemble", "verify"]
[model]
preset = "cauchy-constant"
[verify]
bounds = ["p0", "eq16", "eq17"]
exponents = false
"#;

#[test]
fn list_presets_names_every_model() {
    let out = bin().arg("list-presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["cauchy-constant", "default-test", "holder-drift", "kato-sigma"] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap_or_else(|| panic!("{name} missing"));
        assert!(line.contains("[valid]"), "{line}");
    }
    assert!(text.contains("kato_norm(h, T = 1) = 5.000000e-1"), "{text}");
}

#[test]
fn minimal_run_writes_reports_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(MINIMAL, a.path(), &[]);
    assert_eq!(ra.status.code(), Some(0), "{}", String::from_utf8_lossy(&ra.stderr));
    let rb = run(MINIMAL, b.path(), &[]);
    assert_eq!(rb.status.code(), Some(0));

    let oa = a.path().join("out");
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(oa.join("bounds.json")).unwrap()).unwrap();
    let ids: Vec<&str> = reports.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["p0", "eq16", "eq17"]);
    assert!(reports.as_array().unwrap().iter().all(|r| r["pass"] == true));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(oa.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config_sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_seconds"]["verify"].as_f64().is_some());

    let files: Vec<String> = manifest["files"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
    assert!(files.len() >= 4);
    for f in files {
        let x = fs::read(oa.join(&f)).unwrap();
        let y = fs::read(b.path().join("out").join(&f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}

#[test]
fn beta_out_of_range_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = MINIMAL.replace("preset = \"cauchy-constant\"", "preset = \"default-test\"\nbeta = 1.5");
    let out = run(&cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("model.beta") && err.contains("(kappa2) range (0,1)"), "{err}");
    assert!(!dir.path().join("out").exists());

    let p = dir.path().join("config.toml");
    let v = bin().arg("validate").arg("--config").arg(&p).output().unwrap();
    assert_eq!(v.status.code(), Some(2));
}

#[test]
fn malformed_configs_and_flags_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&format!("{MINIMAL}\n[grid]\nwidth = 3\n"), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("width"));
    let out = run(&MINIMAL.replace("\"eq17\"", "\"p9\""), dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("verify.bounds"));
    let out = run(MINIMAL, dir.path(), &["--workers", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let missing = bin().args(["run", "--config", "/nonexistent/x.toml"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));

    fs::write(dir.path().join("good.toml"), MINIMAL).unwrap();
    let ok = bin().arg("validate").arg("--config").arg(dir.path().join("good.toml")).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn runtime_failure_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "seed = 1\nexperiments = [\"zvonkin\"]\n[model]\npreset = \"cauchy-constant\"\nb = \"0.5*cos(x)\"\nb_sup = 0.5\nb_holder = 0.5\n[zvonkin]\nlambda = 0.1\n";
    let out = run(cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    assert!(fs::read_to_string(o.join("FAILED")).unwrap().contains("zvonkin"));
    assert!(o.join("assemble.json").exists());
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(o.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["status"], "failed");
}

#[test]
fn seed_override_changes_the_simulation() {
    let cfg = "seed = 1\nexperiments = [\"simulate\"]\n[model]\npreset = \"cauchy-constant\"\n[simulate]\npaths = 200\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(run(cfg, a.path(), &[]).status.success());
    assert!(run(cfg, b.path(), &["--seed", "2"]).status.success());
    let fa = fs::read(a.path().join("out/finals.csv")).unwrap();
    let fb = fs::read(b.path().join("out/finals.csv")).unwrap();
    assert_ne!(fa, fb);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 2);
}
