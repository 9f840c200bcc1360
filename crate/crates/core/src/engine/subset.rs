use std::collections::HashMap;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::correlation::CorrMeasure;
use super::evolve::evolve_level;
use super::resample::replicate_indices;
use super::schedule::{LevelRecord, LevelSchedule, Stage};
use super::threshold::solve_failure_threshold;
use super::updating::{build_proposal, eval_count, feedback_rate, run_updating};
use super::{Population, SamplerConfig, UpdatingConfig, UpdatingResult};
use crate::error::{Error, Result};
use crate::prob::{BlockPrior, FailureFunction, LogLikelihood, TemperedTarget};
use crate::rng::{stream, Purpose};
use crate::samplers::weighted_covariance;

/// Random-stream levels for subset simulation start here so a posterior run
/// never reuses the streams of its updating stage.
const SUBSET_LEVEL_OFFSET: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubsetConfig {
    #[serde(flatten)]
    pub sampler: SamplerConfig,
    /// Conditional probability of each intermediate level.
    pub kappa: f64,
    pub max_levels: usize,
    /// Also evolve the final level so the returned population samples the
    /// failure domain.
    pub sample_failure_domain: bool,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        Self {
            sampler: SamplerConfig { corr_measure: CorrMeasure::LogTarget, ..SamplerConfig::default() },
            kappa: 0.5,
            max_levels: 40,
            sample_failure_domain: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SubsetResult {
    pub probability: f64,
    /// Standard deviation estimate of `probability`.
    pub sigma: f64,
    /// Coefficient of variation estimate.
    pub cov: f64,
    pub thresholds: Vec<f64>,
    pub level_fractions: Vec<f64>,
    /// Final population; in the failure domain when it was evolved.
    pub population: Population,
    pub schedule: LevelSchedule,
    pub evaluations: u64,
}

impl SubsetResult {
    pub fn levels(&self) -> usize {
        self.thresholds.len()
    }
}

/// Within-group correlation factor `gamma` of the level indicator.
///
/// Chains that share a parent form a group. `gamma = (pairs / N) * rho`
/// where `rho` is the pooled correlation of the indicator over ordered
/// same-group pairs. Negative estimates are clamped to zero.
pub fn group_gamma(indicator: &[bool], lineage: &[usize]) -> f64 {
    let n = indicator.len();
    if n == 0 || lineage.len() != n {
        return 0.0;
    }
    let p = indicator.iter().filter(|&&b| b).count() as f64 / n as f64;
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let mut groups: HashMap<usize, (u64, u64)> = HashMap::new();
    for (&b, &g) in indicator.iter().zip(lineage) {
        let e = groups.entry(g).or_default();
        e.0 += 1;
        e.1 += b as u64;
    }
    let (mut pairs, mut both) = (0u64, 0u64);
    for &(m, hits) in groups.values() {
        pairs += m * (m - 1);
        both += hits * hits.saturating_sub(1);
    }
    if pairs == 0 {
        return 0.0;
    }
    let r = both as f64 / pairs as f64 - p * p;
    let rho = r / (p * (1.0 - p));
    (pairs as f64 / n as f64 * rho).max(0.0)
}

/// Subset simulation started from `pop`, whose chains are treated as
/// independent draws from the base distribution (prior, or posterior when
/// `likelihood` is given).
pub fn run_subset(
    prior: Arc<BlockPrior>,
    failure: Arc<dyn FailureFunction>,
    likelihood: Option<Arc<dyn LogLikelihood>>,
    mut pop: Population,
    cfg: &SubsetConfig,
) -> Result<SubsetResult> {
    let sc = &cfg.sampler;
    sc.validate()?;
    if cfg.max_levels == 0 {
        return Err(Error::InvalidConfig("subset level cap must be positive".into()));
    }
    let n = pop.len();
    let base = TemperedTarget::failure(prior.clone(), Some(failure), likelihood, f64::NEG_INFINITY)?;
    let eval_start = eval_count(&base);
    let mut t_level = Instant::now();
    pop.retarget(&base);
    pop.lineage = (0..n).collect();

    let mut controller = sc.controller(prior.dim())?;
    let opts = sc.evolve_options();
    let mut schedule = LevelSchedule::default();
    let mut thresholds = Vec::new();
    let mut fractions = Vec::new();
    let mut delta2 = 0.0;
    let mut evals_before = eval_start;
    let mut last_threshold = f64::NEG_INFINITY;

    for k in 1..=cfg.max_levels {
        let f = pop.failure_values()?;
        let thr = solve_failure_threshold(&f, cfg.kappa)?;
        let indicator: Vec<bool> = f.iter().map(|&v| v >= thr.beta).collect();
        let gamma = if k == 1 { 0.0 } else { group_gamma(&indicator, &pop.lineage) };
        let pk = thr.fraction;
        delta2 += (1.0 - pk) / (n as f64 * pk) * (1.0 + gamma);
        thresholds.push(thr.beta);
        fractions.push(pk);
        last_threshold = thr.beta;

        let mut record = LevelRecord {
            stage: Stage::Subset,
            level: k,
            beta: thr.beta,
            delta_beta: None,
            weight_cov: None,
            log_mean_weight: None,
            level_fraction: Some(pk),
            gamma: Some(gamma),
            ess: thr.survivors.len() as f64,
            sigma: controller.sigma,
            stage2_rate: 0.0,
            min_component_rate: 0.0,
            chain_length: 0,
            correlation: 0.0,
            correlation_fallback: false,
            cap_hit: false,
            evaluations: 0,
            wall_time_s: 0.0,
        };

        if !thr.is_final || cfg.sample_failure_domain {
            let samples = pop.samples();
            let surv: Vec<&[f64]> = thr.survivors.iter().map(|&i| samples[i]).collect();
            let cov = weighted_covariance(&surv, &vec![1.0; surv.len()])?;
            let level = SUBSET_LEVEL_OFFSET + k;
            let mut rng = stream(sc.seed, level, Purpose::Resample, 0);
            let idx = replicate_indices(&thr.survivors, n, &mut rng)?;
            pop = pop.resampled(&idx);
            let target = TemperedTarget::failure(
                prior.clone(),
                base.failure_fn().cloned(),
                base.likelihood().cloned(),
                thr.beta,
            )?;
            pop.retarget(&target);
            let prop = build_proposal(sc.kernel, cov, &prior, controller.sigma)?;
            let report = evolve_level(&mut pop, &target, sc.kernel, &prop, &opts, sc.seed, level)?;
            controller = controller.update(feedback_rate(sc.kernel, &report));
            record.stage2_rate = report.stats.stage2_rate;
            record.min_component_rate = report.stats.min_component_rate;
            record.chain_length = report.steps;
            record.correlation = report.correlation;
            record.correlation_fallback = report.fallback;
            record.cap_hit = report.cap_hit;
        }
        let evals_now = eval_count(&base);
        record.evaluations = evals_now - evals_before;
        record.wall_time_s = t_level.elapsed().as_secs_f64();
        evals_before = evals_now;
        t_level = Instant::now();
        schedule.push(record);

        if thr.is_final {
            let probability: f64 = fractions.iter().product();
            let cov = delta2.sqrt();
            return Ok(SubsetResult {
                probability,
                sigma: probability * cov,
                cov,
                thresholds,
                level_fractions: fractions,
                population: pop,
                schedule,
                evaluations: eval_count(&base) - eval_start,
            });
        }
    }
    Err(Error::LevelCapExceeded { cap: cfg.max_levels, beta: last_threshold })
}

/// Subset simulation from independent prior draws.
pub fn run_prior_subset(
    prior: Arc<BlockPrior>,
    failure: Arc<dyn FailureFunction>,
    cfg: &SubsetConfig,
) -> Result<SubsetResult> {
    cfg.sampler.validate()?;
    let target =
        TemperedTarget::failure(prior.clone(), Some(failure.clone()), None, f64::NEG_INFINITY)?;
    let start = failure.evaluations();
    let pop = Population::from_prior(&target, cfg.sampler.n, cfg.sampler.seed)?;
    let init = failure.evaluations() - start;
    let mut r = run_subset(prior, failure, None, pop, cfg)?;
    r.evaluations += init;
    if let Some(first) = r.schedule.records.first_mut() {
        first.evaluations += init;
    }
    Ok(r)
}

#[derive(Debug, Clone)]
pub struct PosteriorReliability {
    pub updating: UpdatingResult,
    pub subset: SubsetResult,
}

impl PosteriorReliability {
    pub fn evaluations(&self) -> u64 {
        self.updating.evaluations + self.subset.evaluations
    }

    pub fn schedule(&self) -> LevelSchedule {
        let mut s = self.updating.schedule.clone();
        s.extend(&self.subset.schedule);
        s
    }
}

/// Bayesian updating followed by subset simulation on the posterior.
pub fn run_posterior_reliability(
    prior: Arc<BlockPrior>,
    likelihood: Arc<dyn LogLikelihood>,
    failure: Arc<dyn FailureFunction>,
    ucfg: &UpdatingConfig,
    scfg: &SubsetConfig,
) -> Result<PosteriorReliability> {
    let updating = run_updating(prior.clone(), likelihood.clone(), ucfg)?;
    let pop = updating.population.clone();
    let subset = run_subset(prior, failure, Some(likelihood), pop, scfg)?;
    Ok(PosteriorReliability { updating, subset })
}
