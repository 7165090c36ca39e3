use clap::{Parser, Subcommand};
use critkernel::cli::{preset_description, preset_kato_weight, run_file, validate_text, RunOptions};
use critkernel::parametrix::{preset, PRESETS};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "critkernel", version, about = "Heat kernels of critical non-local operators with drift")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args, Clone)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// Largest accepted refinement drift of the verifier reports.
    #[arg(long)]
    tolerance: Option<f64>,
}

impl Common {
    fn options(&self) -> RunOptions {
        RunOptions { out: self.out.clone(), seed: self.seed, workers: self.workers, tolerance: self.tolerance }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment list of a config.
    Run(Common),
    /// Print the built-in models.
    ListPresets,
    /// Parse and validate a config without running it.
    Validate(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::ListPresets => {
            for name in PRESETS {
                let ok = preset(name).map(|m| m.validate());
                let status = match ok {
                    Some(Ok(())) => "valid".to_string(),
                    Some(Err(e)) => format!("INVALID: {e}"),
                    None => "missing".to_string(),
                };
                println!("{name:<16} {}  [{status}]", preset_description(name));
                if let Some((h, k)) = preset_kato_weight(name) {
                    println!("{:<16} h = 1/8 ({:?}), kato_norm(h, T = 1) = {k:.6e}", "", h.class);
                }
            }
            ExitCode::SUCCESS
        }
        Cmd::Validate(c) => {
            let text = match std::fs::read_to_string(&c.config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: field `--config`: {}: {e}", c.config.display());
                    return ExitCode::from(2);
                }
            };
            match validate_text(&text, &c.options()) {
                Ok((_, model, _)) => {
                    println!("ok: model {} hash {}", model.name, model.hash());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Cmd::Run(c) => match run_file(&c.config, &c.options()) {
            Ok(s) => {
                if !s.reports.is_empty() {
                    print!("{}", critkernel::verifiers::summary_table(&s.reports));
                }
                println!("wrote {} files to {}", s.files.len() + 1, s.out.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
