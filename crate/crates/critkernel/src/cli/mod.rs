//! Configuration, expression grammar and experiment runner behind the binary.

pub mod config;
pub mod expr;
pub mod run;

pub use config::{preset_description, preset_kato_weight, Experiment, ExperimentConfig};
pub use run::{execution_order, run_file, run_text, validate_text, RunError, RunOptions, RunSummary};
