//! Experiment runner: configs, pipelines, result artifacts and kernel
//! comparisons.
//!
//! A run writes into its output directory:
//!
//! - `manifest.json`: config hash, seed, content digest, evaluation totals
//!   and the result summary
//! - `timing.json`: wall-clock times, kept apart so every other file is
//!   reproducible byte for byte
//! - `repeats.csv`: one row per repetition
//! - `rep-NNN/schedule.jsonl`, `rep-NNN/levels.csv`: per-level records
//! - `rep-NNN/posterior.csv`, `rep-NNN/failure.csv`: final populations
//! - `data/`: observation tables for network models
//! - `ess.csv` for the ESS table pipeline

pub mod compare;
pub mod config;
pub mod error;
pub mod model;
pub mod oracle;
pub mod run;

pub use compare::{check_comparable, compare, CompareRow};
pub use config::{ExperimentConfig, ModelConfig, Overrides, Pipeline, SyntheticData, OUTPUT_DIR_ENV};
pub use error::CliError;
pub use model::{Problem, Reference};
pub use oracle::{conjugate_log_evidence, gaussian_tail, TailReference};
pub use run::{run, EssRow, RepSummary, ResultSummary, RunManifest};
