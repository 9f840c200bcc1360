use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use stmcmc::engine::{
    predict_ess, run_posterior_reliability, run_prior_subset, run_updating, simulate_ess, LevelSchedule,
    Population, Stage,
};

use crate::config::{ExperimentConfig, Pipeline};
use crate::error::CliError;
use crate::model::{HanoiData, Problem};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepSummary {
    pub rep: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
    /// Standard deviation estimate of `probability`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_evidence: Option<f64>,
    pub updating_levels: usize,
    pub subset_levels: usize,
    pub evaluations: u64,
}

impl RepSummary {
    pub fn levels(&self) -> usize {
        self.updating_levels + self.subset_levels
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EssRow {
    pub rho: f64,
    pub kappa: f64,
    pub n: usize,
    /// Large-population fixed point of the predicted recursion.
    pub predicted: f64,
    /// Predicted value after the simulated number of levels.
    pub predicted_final: f64,
    /// Pooled over the second half of the levels.
    pub simulated: f64,
    /// At the last level.
    pub simulated_final: f64,
    pub learning: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ResultSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_log_evidence: Option<f64>,
    /// Fraction of repeats whose `probability +- 3 sigma` covers the reference.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage_3sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_abs_log10_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub median_abs_log_evidence_error: Option<f64>,
    pub repeats: Vec<RepSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ess_table: Vec<EssRow>,
}

/// Record of one `run`. Everything here is reproducible from the config;
/// wall time is kept out of `manifest.json` and written to `timing.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    /// SHA-256 over the result files, by relative path.
    pub content_version: String,
    pub version: String,
    pub pipeline: Pipeline,
    pub workers: usize,
    pub total_evaluations: u64,
    pub result: ResultSummary,
    pub schedules: Vec<String>,
    pub files: Vec<String>,
    pub config: ExperimentConfig,
    #[serde(skip)]
    pub wall_time_s: f64,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

struct RepOutput {
    summary: RepSummary,
    schedule: LevelSchedule,
    populations: Vec<(&'static str, Population)>,
}

fn run_rep(cfg: &ExperimentConfig, problem: &Problem, rep: usize) -> Result<RepOutput, CliError> {
    let seed = cfg.seed.wrapping_add(rep as u64);
    let start = problem.evaluations();
    let missing = |what: &str| CliError::config(format!("model has no {what}"));
    let mut summary = RepSummary {
        rep,
        seed,
        probability: None,
        sigma: None,
        log_evidence: None,
        updating_levels: 0,
        subset_levels: 0,
        evaluations: 0,
    };
    let (schedule, populations) = match cfg.pipeline {
        Pipeline::PriorFail => {
            let failure = problem.failure.clone().ok_or_else(|| missing("failure function"))?;
            let r = run_prior_subset(problem.prior.clone(), failure, &cfg.subset(seed))?;
            summary.probability = Some(r.probability);
            summary.sigma = Some(r.sigma);
            summary.subset_levels = r.levels();
            (r.schedule, vec![("failure", r.population)])
        }
        Pipeline::Update | Pipeline::EvidenceDemo => {
            let like = problem.likelihood.clone().ok_or_else(|| missing("likelihood"))?;
            let r = run_updating(problem.prior.clone(), like, &cfg.updating(seed))?;
            summary.log_evidence = Some(r.log_evidence);
            summary.updating_levels = r.schedule.records.len();
            (r.schedule, vec![("posterior", r.population)])
        }
        Pipeline::PosteriorFail => {
            let like = problem.likelihood.clone().ok_or_else(|| missing("likelihood"))?;
            let failure = problem.failure.clone().ok_or_else(|| missing("failure function"))?;
            let r = run_posterior_reliability(
                problem.prior.clone(),
                like,
                failure,
                &cfg.updating(seed),
                &cfg.subset(seed),
            )?;
            summary.probability = Some(r.subset.probability);
            summary.sigma = Some(r.subset.sigma);
            summary.log_evidence = Some(r.updating.log_evidence);
            summary.updating_levels = r.updating.schedule.records.len();
            summary.subset_levels = r.subset.levels();
            let schedule = r.schedule();
            (schedule, vec![("posterior", r.updating.population), ("failure", r.subset.population)])
        }
        Pipeline::EssTable => unreachable!("handled separately"),
    };
    summary.evaluations = problem.evaluations() - start;
    if summary.evaluations != schedule.evaluations() {
        return Err(CliError::Output(format!(
            "evaluation count {} disagrees with the per-level total {}",
            summary.evaluations,
            schedule.evaluations()
        )));
    }
    Ok(RepOutput { summary, schedule, populations })
}

fn ess_table(cfg: &ExperimentConfig) -> Result<Vec<EssRow>, CliError> {
    let ess = cfg.ess.clone().unwrap_or_default();
    ess.rho
        .iter()
        .map(|&rho| {
            let p = predict_ess(cfg.kappa_star, rho, cfg.n, ess.levels)?;
            let s = simulate_ess(cfg.n, cfg.kappa_star, rho, ess.levels, ess.reps, cfg.seed)?;
            Ok(EssRow {
                rho,
                kappa: cfg.kappa_star,
                n: cfg.n,
                predicted: p.fixed_point,
                predicted_final: *p.trajectory.last().expect("non-empty"),
                simulated: s.stationary,
                simulated_final: *s.per_level.last().expect("non-empty"),
                learning: p.learning,
            })
        })
        .collect()
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn summarize(problem: Option<&Problem>, repeats: Vec<RepSummary>, ess: Vec<EssRow>) -> ResultSummary {
    let reference = problem.map(|p| p.reference).unwrap_or_default();
    let mut s = ResultSummary {
        reference_probability: reference.probability,
        reference_log_evidence: reference.log_evidence,
        repeats,
        ess_table: ess,
        ..Default::default()
    };
    let probs: Vec<(f64, f64)> =
        s.repeats.iter().filter_map(|r| Some((r.probability?, r.sigma?))).collect();
    if let (Some(p), false) = (reference.probability, probs.is_empty()) {
        let covered = probs.iter().filter(|(q, sd)| (q - p).abs() <= 3.0 * sd).count();
        s.coverage_3sigma = Some(covered as f64 / probs.len() as f64);
        s.median_abs_log10_error = median(probs.iter().map(|(q, _)| (q.log10() - p.log10()).abs()).collect());
    }
    if let Some(z) = reference.log_evidence {
        s.median_abs_log_evidence_error =
            median(s.repeats.iter().filter_map(|r| Some((r.log_evidence? - z).abs())).collect());
    }
    s
}

/// Buffers result files so their digest can be taken before writing.
#[derive(Default)]
struct Artifacts {
    files: BTreeMap<String, Vec<u8>>,
}

impl Artifacts {
    fn add(&mut self, path: String, bytes: Vec<u8>) {
        self.files.insert(path, bytes);
    }

    fn csv(&mut self, path: String, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        self.add(path, bytes);
        Ok(())
    }

    fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (path, bytes) in &self.files {
            h.update(path.as_bytes());
            h.update([0]);
            h.update((bytes.len() as u64).to_le_bytes());
            h.update(bytes);
        }
        hex::encode(h.finalize())
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        for (path, bytes) in &self.files {
            let p = dir.join(path);
            if let Some(parent) = p.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(p, bytes)?;
        }
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn strings<I: IntoIterator<Item = S>, S: ToString>(it: I) -> Vec<String> {
    it.into_iter().map(|s| s.to_string()).collect()
}

fn levels_rows(schedule: &LevelSchedule) -> Vec<Vec<String>> {
    let mut total = 0;
    schedule
        .records
        .iter()
        .map(|r| {
            total += r.evaluations;
            let stage = match r.stage {
                Stage::Updating => "updating",
                Stage::Subset => "subset",
            };
            vec![
                stage.to_string(),
                r.level.to_string(),
                r.beta.to_string(),
                r.evaluations.to_string(),
                total.to_string(),
                r.chain_length.to_string(),
                r.sigma.to_string(),
                r.stage2_rate.to_string(),
                r.min_component_rate.to_string(),
                r.correlation.to_string(),
                r.ess.to_string(),
                r.cap_hit.to_string(),
            ]
        })
        .collect()
}

fn population_rows(pop: &Population) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let like = pop.log_likes().ok();
    let fail = pop.failure_values().ok();
    let mut extra = Vec::new();
    if like.is_some() {
        extra.push("log_likelihood");
    }
    if fail.is_some() {
        extra.push("failure_value");
    }
    let rows = pop
        .samples()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut row = strings(x.iter());
            if let Some(l) = &like {
                row.push(l[i].to_string());
            }
            if let Some(f) = &fail {
                row.push(f[i].to_string());
            }
            row
        })
        .collect();
    (extra, rows)
}

fn dataset_artifacts(art: &mut Artifacts, data: &HanoiData) -> Result<(), CliError> {
    let (mut o, mut c) = (Vec::new(), Vec::new());
    data.dataset.write_to(&mut o, &mut c, &data.network)?;
    art.add("data/observations.csv".into(), o);
    art.add("data/conditions.csv".into(), c);
    if let Some(truth) = &data.truth {
        let rows: Vec<Vec<String>> = data
            .network
            .pipe_ids()
            .iter()
            .zip(truth)
            .map(|(id, l)| vec![id.to_string(), l.coeff.to_string(), l.position.to_string()])
            .collect();
        art.csv("data/truth.csv".into(), &strings(["pipe_id", "leak_size", "leak_pos"]), &rows)?;
    }
    Ok(())
}

/// Validate, execute and write every artifact of `cfg` into its output
/// directory.
pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
    cfg.validate()?;
    let t0 = Instant::now();
    let problem = match &cfg.model {
        Some(m) if cfg.pipeline != Pipeline::EssTable => Some(Problem::build(m)?),
        _ => None,
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::config(format!("cannot start {} workers: {e}", cfg.workers)))?;

    let mut art = Artifacts::default();
    let mut rep_times = Vec::new();
    let mut summaries = Vec::new();
    let mut schedules = Vec::new();
    let mut ess = Vec::new();
    let level_header = strings([
        "stage",
        "level",
        "beta",
        "evaluations",
        "cumulative_evaluations",
        "chain_length",
        "sigma",
        "stage2_rate",
        "min_component_rate",
        "correlation",
        "ess",
        "cap_hit",
    ]);

    if let Some(problem) = &problem {
        if let Some(d) = &problem.hanoi {
            dataset_artifacts(&mut art, d)?;
        }
        for rep in 0..cfg.repeat {
            let t = Instant::now();
            let out = pool.install(|| run_rep(cfg, problem, rep))?;
            rep_times.push(t.elapsed().as_secs_f64());
            let dir = format!("rep-{rep:03}");
            let mut jsonl = Vec::new();
            out.schedule.write_jsonl(&mut jsonl)?;
            art.add(format!("{dir}/schedule.jsonl"), jsonl);
            schedules.push(format!("{dir}/schedule.jsonl"));
            art.csv(format!("{dir}/levels.csv"), &level_header, &levels_rows(&out.schedule))?;
            for (name, pop) in &out.populations {
                let (extra, rows) = population_rows(pop);
                let mut header = problem.columns.clone();
                header.extend(strings(extra));
                art.csv(format!("{dir}/{name}.csv"), &header, &rows)?;
            }
            summaries.push(out.summary);
        }
    } else {
        let t = Instant::now();
        ess = pool.install(|| ess_table(cfg))?;
        rep_times.push(t.elapsed().as_secs_f64());
        let rows: Vec<Vec<String>> = ess
            .iter()
            .map(|r| {
                strings([
                    r.rho.to_string(),
                    r.kappa.to_string(),
                    r.n.to_string(),
                    r.predicted.to_string(),
                    r.predicted_final.to_string(),
                    r.simulated.to_string(),
                    (r.simulated / r.predicted).to_string(),
                    r.learning.to_string(),
                ])
            })
            .collect();
        let header = strings([
            "rho",
            "kappa",
            "n",
            "predicted",
            "predicted_final",
            "simulated",
            "ratio",
            "learning",
        ]);
        art.csv("ess.csv".into(), &header, &rows)?;
    }

    if !summaries.is_empty() {
        let rows: Vec<Vec<String>> = summaries
            .iter()
            .map(|s| {
                vec![
                    s.rep.to_string(),
                    s.seed.to_string(),
                    opt(s.probability),
                    opt(s.sigma),
                    opt(s.log_evidence),
                    s.levels().to_string(),
                    s.evaluations.to_string(),
                ]
            })
            .collect();
        let header =
            strings(["rep", "seed", "probability", "sigma", "log_evidence", "levels", "evaluations"]);
        art.csv("repeats.csv".into(), &header, &rows)?;
    }

    let total_evaluations = summaries.iter().map(|s| s.evaluations).sum();
    let mut manifest = RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        content_version: art.digest(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        pipeline: cfg.pipeline,
        workers: cfg.workers,
        total_evaluations,
        result: summarize(problem.as_ref(), summaries, ess),
        schedules,
        files: art.files.keys().cloned().collect(),
        config: cfg.normalized(),
        wall_time_s: 0.0,
        output_dir: cfg.output_dir.clone(),
    };

    fs::create_dir_all(&cfg.output_dir)?;
    art.write(&cfg.output_dir)?;
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(cfg.output_dir.join("manifest.json"), json)?;
    manifest.wall_time_s = t0.elapsed().as_secs_f64();
    let timing = serde_json::json!({ "wall_time_s": manifest.wall_time_s, "repeats_s": rep_times });
    fs::write(cfg.output_dir.join("timing.json"), serde_json::to_vec_pretty(&timing)?)?;
    Ok(manifest)
}
