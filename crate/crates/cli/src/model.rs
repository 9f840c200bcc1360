use std::sync::Arc;

use stmcmc::prob::{BlockPrior, FailureFunction, FnFailure, FnLikelihood, LogLikelihood, Marginal};
use stmcmc_hydro::{
    hanoi, load_network, synthetic_dataset, Dataset, HeadLikelihood, LeakParams, Network, WaterModel,
};

use crate::config::ModelConfig;
use crate::error::CliError;
use crate::oracle::{conjugate_log_evidence, gaussian_tail};

/// Known answers for a model, when it has them.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Reference {
    pub probability: Option<f64>,
    pub log_evidence: Option<f64>,
}

/// Observation data behind a Hanoi likelihood, kept for the run artifacts.
#[derive(Debug, Clone)]
pub struct HanoiData {
    pub network: Arc<Network>,
    pub dataset: Dataset,
    /// Leak configuration that generated synthetic data.
    pub truth: Option<Vec<LeakParams>>,
}

pub struct Problem {
    pub prior: Arc<BlockPrior>,
    pub likelihood: Option<Arc<dyn LogLikelihood>>,
    pub failure: Option<Arc<dyn FailureFunction>>,
    /// Column names for the parameter vector.
    pub columns: Vec<String>,
    pub reference: Reference,
    pub hanoi: Option<HanoiData>,
}

fn tail_failure(threshold: f64) -> Arc<dyn FailureFunction> {
    // at least 1 exactly when the first coordinate reaches the threshold
    Arc::new(FnFailure::new(move |x: &[f64]| x[0] - threshold + 1.0))
}

fn numbered(prefix: &str, d: usize) -> Vec<String> {
    (0..d).map(|i| format!("{prefix}{i}")).collect()
}

impl Problem {
    pub fn build(m: &ModelConfig) -> Result<Self, CliError> {
        match m {
            ModelConfig::GaussianTail { dim, threshold } => Ok(Problem {
                prior: Arc::new(BlockPrior::iid("x", *dim, Marginal::gaussian(0.0, 1.0)?)?),
                likelihood: None,
                failure: Some(tail_failure(*threshold)),
                columns: numbered("x", *dim),
                reference: Reference {
                    probability: Some(gaussian_tail(*threshold).probability),
                    log_evidence: None,
                },
                hanoi: None,
            }),
            ModelConfig::Constant { dim, threshold, log_value } => {
                let c = *log_value;
                Ok(Problem {
                    prior: Arc::new(BlockPrior::iid("x", *dim, Marginal::gaussian(0.0, 1.0)?)?),
                    likelihood: Some(Arc::new(FnLikelihood::new(move |_: &[f64]| c))),
                    failure: Some(tail_failure(*threshold)),
                    columns: numbered("x", *dim),
                    reference: Reference {
                        probability: Some(gaussian_tail(*threshold).probability),
                        log_evidence: Some(c),
                    },
                    hanoi: None,
                })
            }
            ModelConfig::Conjugate { prior_mean, prior_sd, noise_sd, data } => {
                let (s, y) = (*noise_sd, data.clone());
                let norm = -(s.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln());
                let like = move |x: &[f64]| {
                    y.iter().map(|v| norm - 0.5 * ((v - x[0]) / s).powi(2)).sum::<f64>()
                };
                Ok(Problem {
                    prior: Arc::new(BlockPrior::iid("mu", 1, Marginal::gaussian(*prior_mean, *prior_sd)?)?),
                    likelihood: Some(Arc::new(FnLikelihood::new(like))),
                    failure: None,
                    columns: vec!["mu".into()],
                    reference: Reference {
                        probability: None,
                        log_evidence: Some(conjugate_log_evidence(*prior_mean, *prior_sd, s, data)),
                    },
                    hanoi: None,
                })
            }
            ModelConfig::Hanoi { network, observations, conditions, synthetic, sigma_m } => {
                let net = Arc::new(match network {
                    Some(p) => load_network(p)?,
                    None => hanoi(),
                });
                let model = Arc::new(WaterModel::new(net.clone()));
                let prior = Arc::new(model.prior());
                let mut columns = Vec::with_capacity(prior.dim());
                columns.extend(net.junction_ids().iter().map(|id| format!("demand_{id}")));
                let pipes = net.pipe_ids();
                columns.extend(pipes.iter().map(|id| format!("leak_size_{id}")));
                columns.extend(pipes.iter().map(|id| format!("leak_pos_{id}")));

                let data = match (observations, conditions, synthetic) {
                    (Some(o), Some(c), _) => {
                        Some(HanoiData { network: net.clone(), dataset: Dataset::read(o, c, &net)?, truth: None })
                    }
                    (_, _, Some(s)) => {
                        let truth = s.case.truth(&net, s.truth_seed);
                        let dataset = synthetic_dataset(&net, &truth, s.conditions, *sigma_m, s.data_seed)?;
                        Some(HanoiData { network: net.clone(), dataset, truth: Some(truth) })
                    }
                    _ => None,
                };
                let likelihood = match &data {
                    Some(d) => Some(Arc::new(HeadLikelihood::new(net.clone(), &d.dataset, *sigma_m)?)
                        as Arc<dyn LogLikelihood>),
                    None => None,
                };
                Ok(Problem {
                    prior,
                    likelihood,
                    failure: Some(model),
                    columns,
                    reference: Reference::default(),
                    hanoi: data,
                })
            }
        }
    }

    /// Total evaluations recorded by the likelihood and failure counters.
    pub fn evaluations(&self) -> u64 {
        self.likelihood.as_ref().map_or(0, |l| l.evaluations())
            + self.failure.as_ref().map_or(0, |f| f.evaluations())
    }
}
