use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{ModelEval, ParamVector, TemperedTarget};

/// Per-chain acceptance bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainCounters {
    pub steps: u64,
    /// Candidates accepted by the final Metropolis test.
    pub accepts: u64,
    /// Per component: accepted at stage 1 and then by the final test.
    pub through: Vec<u64>,
}

impl ChainCounters {
    pub fn new(dim: usize) -> Self {
        Self { steps: 0, accepts: 0, through: vec![0; dim] }
    }

    pub fn reset(&mut self) {
        self.steps = 0;
        self.accepts = 0;
        self.through.iter_mut().for_each(|c| *c = 0);
    }
}

/// Current point of one chain together with cached model outputs.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub(crate) theta: ParamVector,
    pub(crate) log_prior: f64,
    pub(crate) model: ModelEval,
    pub(crate) log_like_part: f64,
    pub counters: ChainCounters,
}

impl ChainState {
    /// Evaluate everything the target needs at `theta`.
    pub fn new(theta: ParamVector, target: &TemperedTarget) -> Result<Self> {
        let log_prior = target.prior().log_density(&theta)?;
        if log_prior == f64::NEG_INFINITY {
            return Err(Error::DegeneratePopulation("chain started outside prior support".into()));
        }
        let model = target.evaluate_model(theta.values());
        Ok(Self::from_parts(theta, log_prior, model, target))
    }

    /// Reuse model outputs already known for `theta`.
    pub fn from_parts(
        theta: ParamVector,
        log_prior: f64,
        model: ModelEval,
        target: &TemperedTarget,
    ) -> Self {
        let dim = theta.dim();
        let eval = target.assemble(log_prior, model);
        Self {
            theta,
            log_prior,
            model,
            log_like_part: eval.log_like_part,
            counters: ChainCounters::new(dim),
        }
    }

    /// Switch to a new target, evaluating any model output it needs that is
    /// not cached yet.
    pub fn retarget(&mut self, target: &TemperedTarget) {
        self.model = target.complete_model(self.theta.values(), self.model);
        self.log_like_part = target.assemble(self.log_prior, self.model).log_like_part;
    }

    pub fn theta(&self) -> &ParamVector {
        &self.theta
    }

    pub fn values(&self) -> &[f64] {
        self.theta.values()
    }

    pub fn log_prior(&self) -> f64 {
        self.log_prior
    }

    pub fn model(&self) -> ModelEval {
        self.model
    }

    pub fn log_like(&self) -> Option<f64> {
        self.model.log_like
    }

    pub fn failure_value(&self) -> Option<f64> {
        self.model.failure_value
    }

    /// Log target under the target last used with this state.
    pub fn log_target(&self) -> f64 {
        self.log_prior + self.log_like_part
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub(crate) fn accept(&mut self, values: Vec<f64>, log_prior: f64, model: ModelEval, part: f64) {
        self.theta.values_mut().copy_from_slice(&values);
        self.log_prior = log_prior;
        self.model = model;
        self.log_like_part = part;
    }
}

/// Acceptance rates pooled over a set of chains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub steps: u64,
    pub stage2_rate: f64,
    pub component_rates: Vec<f64>,
    pub min_component_rate: f64,
}

impl AcceptanceStats {
    pub fn from_chains(chains: &[ChainState]) -> Self {
        let dim = chains.first().map_or(0, ChainState::dim);
        let mut steps = 0;
        let mut accepts = 0;
        let mut through = vec![0u64; dim];
        for c in chains {
            steps += c.counters.steps;
            accepts += c.counters.accepts;
            for (t, &x) in through.iter_mut().zip(&c.counters.through) {
                *t += x;
            }
        }
        let denom = steps.max(1) as f64;
        let component_rates: Vec<f64> = through.iter().map(|&t| t as f64 / denom).collect();
        let min_component_rate = component_rates.iter().copied().fold(f64::INFINITY, f64::min);
        Self {
            steps,
            stage2_rate: accepts as f64 / denom,
            min_component_rate: if dim == 0 { 0.0 } else { min_component_rate },
            component_rates,
        }
    }
}
