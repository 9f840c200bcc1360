use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::correlation::CorrMeasure;
use super::evolve::{evolve_level, EvolveOptions, EvolveReport};
use super::resample::multinomial_indices;
use super::schedule::{LevelRecord, LevelSchedule, Stage};
use super::weights::{
    incremental_log_weights, kish_ess, log_mean_exp, normalized_weights, solve_delta_beta,
    weight_cov,
};
use super::{Controller, Population};
use crate::error::{Error, Result};
use crate::prob::{BlockPrior, LogLikelihood, TargetKind, TemperedTarget};
use crate::rng::{stream, Purpose};
use crate::samplers::{weighted_covariance, KernelKind, ProposalSpec};

/// Settings shared by every pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub n: usize,
    pub kernel: KernelKind,
    pub rho_target: f64,
    pub block: usize,
    pub max_steps: usize,
    pub corr_measure: CorrMeasure,
    pub target_rate: f64,
    pub gain: f64,
    /// Initial proposal scale; defaults to `2.38 / sqrt(d)` for RWM and 1
    /// for the modified kernels.
    pub initial_sigma: Option<f64>,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n: 1024,
            kernel: KernelKind::Romma,
            rho_target: 0.6,
            block: 5,
            max_steps: 200,
            corr_measure: CorrMeasure::Cca,
            target_rate: 0.234,
            gain: 2.1,
            initial_sigma: None,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("population size {} too small", self.n)));
        }
        if !(self.rho_target > 0.0 && self.rho_target < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "correlation target {} outside (0, 1)",
                self.rho_target
            )));
        }
        if self.block == 0 || self.max_steps == 0 {
            return Err(Error::InvalidConfig("block and max_steps must be positive".into()));
        }
        Controller::new(self.initial_sigma.unwrap_or(1.0), self.target_rate, self.gain)?;
        Ok(())
    }

    pub(crate) fn controller(&self, dim: usize) -> Result<Controller> {
        let sigma = self.initial_sigma.unwrap_or(match self.kernel {
            KernelKind::Rwm => 2.38 / (dim as f64).sqrt(),
            KernelKind::Mma | KernelKind::Romma => 1.0,
        });
        Controller::new(sigma, self.target_rate, self.gain)
    }

    pub(crate) fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            rho_target: self.rho_target,
            block: self.block,
            max_steps: self.max_steps,
            measure: self.corr_measure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UpdatingConfig {
    #[serde(flatten)]
    pub sampler: SamplerConfig,
    /// Target COV of the plausibility weights.
    pub kappa_star: f64,
    /// Fixed exponents `0 < b_1 < ... < 1` instead of the adaptive rule.
    pub schedule: Option<Vec<f64>>,
    pub max_levels: usize,
}

impl Default for UpdatingConfig {
    fn default() -> Self {
        Self { sampler: SamplerConfig::default(), kappa_star: 1.0, schedule: None, max_levels: 500 }
    }
}

#[derive(Debug, Clone)]
pub struct UpdatingResult {
    /// Equally weighted posterior samples.
    pub population: Population,
    pub schedule: LevelSchedule,
    pub log_evidence: f64,
    pub evaluations: u64,
}

pub(crate) fn eval_count(target: &TemperedTarget) -> u64 {
    target.likelihood().map_or(0, |l| l.evaluations())
        + target.failure_fn().map_or(0, |f| f.evaluations())
}

/// Proposal built from a population covariance. Components whose variance
/// collapsed get a small floor taken from the prior.
pub(crate) fn build_proposal(
    kernel: KernelKind,
    mut cov: DMatrix<f64>,
    prior: &BlockPrior,
    sigma: f64,
) -> Result<ProposalSpec> {
    for (j, v) in prior.variances().into_iter().enumerate() {
        let floor = 1e-12 * v;
        if !(cov[(j, j)] > floor) {
            cov[(j, j)] = floor;
        }
    }
    match kernel {
        KernelKind::Mma => ProposalSpec::diagonal_of(&cov, sigma),
        KernelKind::Rwm | KernelKind::Romma => ProposalSpec::new(cov, sigma),
    }
}

pub(crate) fn feedback_rate(kernel: KernelKind, r: &EvolveReport) -> f64 {
    match kernel {
        KernelKind::Rwm | KernelKind::Mma => r.stats.stage2_rate,
        KernelKind::Romma => r.stats.min_component_rate,
    }
}

/// Tempered transition from prior to posterior.
pub fn run_updating(
    prior: Arc<BlockPrior>,
    likelihood: Arc<dyn LogLikelihood>,
    cfg: &UpdatingConfig,
) -> Result<UpdatingResult> {
    cfg.sampler.validate()?;
    if let Some(s) = &cfg.schedule {
        let ok = s.windows(2).all(|w| w[0] < w[1])
            && s.first().is_some_and(|b| *b > 0.0)
            && s.last() == Some(&1.0);
        if !ok {
            return Err(Error::InvalidConfig(
                "fixed schedule must increase strictly from above 0 to exactly 1".into(),
            ));
        }
    }
    let sc = &cfg.sampler;
    let base = TemperedTarget::exponent(prior.clone(), Some(likelihood), 0.0)?;
    let eval_start = eval_count(&base);
    let mut t_level = Instant::now();
    let mut pop = Population::from_prior(&base, sc.n, sc.seed)?;
    let mut controller = sc.controller(prior.dim())?;
    let opts = sc.evolve_options();
    let mut schedule = LevelSchedule::default();
    let mut beta = 0.0;
    let mut log_evidence = 0.0;
    let mut evals_before = eval_start;

    for k in 1..=cfg.max_levels {
        let ll = pop.log_likes()?;
        let cap = 1.0 - beta;
        let dbeta = match &cfg.schedule {
            Some(s) => s[k - 1] - beta,
            None => solve_delta_beta(&ll, cfg.kappa_star, cap)?,
        };
        if !(dbeta > 1e-300) {
            return Err(Error::DegeneratePopulation(format!(
                "exponent increment {dbeta} at level {k}"
            )));
        }
        let next_beta = if dbeta >= cap { 1.0 } else { beta + dbeta };
        let lw = incremental_log_weights(&ll, dbeta);
        let log_c = log_mean_exp(&lw);
        let w = normalized_weights(&lw)?;
        let cov_w = weight_cov(&lw);
        let ess = kish_ess(&w);
        let cov = weighted_covariance(&pop.samples(), &w)?;
        let mut rng = stream(sc.seed, k, Purpose::Resample, 0);
        let idx = multinomial_indices(&w, sc.n, &mut rng)?;
        pop = pop.resampled(&idx);

        let target = base.with_kind(TargetKind::Exponent { beta: next_beta })?;
        pop.retarget(&target);
        let prop = build_proposal(sc.kernel, cov, &prior, controller.sigma)?;
        let report = evolve_level(&mut pop, &target, sc.kernel, &prop, &opts, sc.seed, k)?;
        let sigma_used = controller.sigma;
        controller = controller.update(feedback_rate(sc.kernel, &report));

        beta = next_beta;
        log_evidence += log_c;
        let evals_now = eval_count(&base);
        schedule.push(LevelRecord {
            stage: Stage::Updating,
            level: k,
            beta,
            delta_beta: Some(dbeta),
            weight_cov: Some(cov_w),
            log_mean_weight: Some(log_c),
            level_fraction: None,
            gamma: None,
            ess,
            sigma: sigma_used,
            stage2_rate: report.stats.stage2_rate,
            min_component_rate: report.stats.min_component_rate,
            chain_length: report.steps,
            correlation: report.correlation,
            correlation_fallback: report.fallback,
            cap_hit: report.cap_hit,
            evaluations: evals_now - evals_before,
            wall_time_s: t_level.elapsed().as_secs_f64(),
        });
        evals_before = evals_now;
        t_level = Instant::now();
        if beta >= 1.0 {
            return Ok(UpdatingResult {
                population: pop,
                schedule,
                log_evidence,
                evaluations: eval_count(&base) - eval_start,
            });
        }
    }
    Err(Error::DegeneratePopulation(format!(
        "exponent reached only {beta} after {} levels",
        cfg.max_levels
    )))
}
