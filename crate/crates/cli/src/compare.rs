use std::path::Path;

use serde::Serialize;
use stmcmc::samplers::KernelKind;

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::run::{run, RunManifest};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub kernel: KernelKind,
    pub seed: u64,
    pub evaluations: u64,
    pub wall_time_s: f64,
    /// Mean failure probability over repeats, or mean log evidence for the
    /// updating pipelines.
    pub estimate: Option<f64>,
    /// Mean reported standard deviation of the probability estimate.
    pub uncertainty: Option<f64>,
    pub levels: usize,
    /// Relative to the first config.
    pub evaluation_ratio: f64,
    pub time_ratio: f64,
}

impl CompareRow {
    /// The row without its timing columns, which vary between runs.
    pub fn deterministic(&self) -> (KernelKind, u64, u64, Option<f64>, Option<f64>, usize, f64) {
        (self.kernel, self.seed, self.evaluations, self.estimate, self.uncertainty, self.levels, self.evaluation_ratio)
    }
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

fn row(m: &RunManifest) -> CompareRow {
    let reps = &m.result.repeats;
    let estimate = mean(reps.iter().filter_map(|r| r.probability))
        .or_else(|| mean(reps.iter().filter_map(|r| r.log_evidence)));
    CompareRow {
        kernel: m.config.kernel,
        seed: m.seed,
        evaluations: m.total_evaluations,
        wall_time_s: m.wall_time_s,
        estimate,
        uncertainty: mean(reps.iter().filter_map(|r| r.sigma)),
        levels: reps.iter().map(|r| r.levels()).sum(),
        evaluation_ratio: 1.0,
        time_ratio: 1.0,
    }
}

/// Check that the configs describe the same experiment up to the kernel.
pub fn check_comparable(configs: &[ExperimentConfig]) -> Result<(), CliError> {
    let Some(first) = configs.first() else {
        return Err(CliError::config("nothing to compare"));
    };
    let mut errs = Vec::new();
    let strip = |c: &ExperimentConfig| ExperimentConfig { kernel: KernelKind::Romma, ..c.normalized() };
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.pipeline != first.pipeline {
            errs.push(format!("mismatched pipelines: config 1 runs {}, config {} runs {}", first.pipeline, i + 1, c.pipeline));
        } else if strip(c) != strip(first) {
            errs.push(format!("config {} differs from config 1 in more than the kernel", i + 1));
        }
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(errs))
    }
}

/// Run every config into its own subdirectory of `out` and write
/// `comparison.csv` there.
pub fn compare(configs: &[ExperimentConfig], out: &Path) -> Result<Vec<CompareRow>, CliError> {
    check_comparable(configs)?;
    for c in configs {
        c.validate()?;
    }
    let mut rows = Vec::with_capacity(configs.len());
    for (i, c) in configs.iter().enumerate() {
        let mut c = c.clone();
        c.output_dir = out.join(format!("{}-{}", i + 1, c.kernel));
        rows.push(row(&run(&c)?));
    }
    let (e0, t0) = (rows[0].evaluations as f64, rows[0].wall_time_s);
    for r in &mut rows {
        r.evaluation_ratio = r.evaluations as f64 / e0;
        r.time_ratio = r.wall_time_s / t0;
    }
    std::fs::create_dir_all(out)?;
    let mut w = csv::Writer::from_path(out.join("comparison.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(rows)
}
