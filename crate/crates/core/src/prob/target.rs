use std::sync::Arc;

use super::{BlockPrior, FailureFunction, LogLikelihood, ParamVector};
use crate::error::{Error, Result};

/// What the current level samples from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    /// `p(theta) * L(theta)^beta`
    Exponent { beta: f64 },
    /// `p(theta) * [L(theta)] * 1{f(theta) >= threshold}`; the likelihood
    /// factor is present only when the target carries one.
    FailureIndicator { threshold: f64 },
}

/// Raw model outputs at a point. `None` means "not evaluated for this target".
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModelEval {
    pub log_like: Option<f64>,
    pub failure_value: Option<f64>,
}

/// Full evaluation of the tempered target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetEval {
    pub log_prior: f64,
    pub log_like_part: f64,
    pub in_domain: bool,
    pub model: ModelEval,
}

impl TargetEval {
    /// Unnormalised log target; `-inf` outside the domain.
    pub fn log_target(&self) -> f64 {
        if self.in_domain {
            self.log_prior + self.log_like_part
        } else {
            f64::NEG_INFINITY
        }
    }
}

#[derive(Clone)]
pub struct TemperedTarget {
    kind: TargetKind,
    prior: Arc<BlockPrior>,
    likelihood: Option<Arc<dyn LogLikelihood>>,
    failure: Option<Arc<dyn FailureFunction>>,
}

impl TemperedTarget {
    pub fn exponent(
        prior: Arc<BlockPrior>,
        likelihood: Option<Arc<dyn LogLikelihood>>,
        beta: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidConfig(format!("beta {beta} outside [0, 1]")));
        }
        if beta > 0.0 && likelihood.is_none() {
            return Err(Error::MissingLikelihood { beta });
        }
        Ok(Self { kind: TargetKind::Exponent { beta }, prior, likelihood, failure: None })
    }

    /// Failure-domain target. With a likelihood this samples the posterior
    /// restricted to `{f >= threshold}`.
    pub fn failure(
        prior: Arc<BlockPrior>,
        failure: Option<Arc<dyn FailureFunction>>,
        likelihood: Option<Arc<dyn LogLikelihood>>,
        threshold: f64,
    ) -> Result<Self> {
        let failure = failure.ok_or(Error::MissingFailureFunction)?;
        if threshold.is_nan() {
            return Err(Error::InvalidConfig("threshold is NaN".into()));
        }
        Ok(Self {
            kind: TargetKind::FailureIndicator { threshold },
            prior,
            likelihood,
            failure: Some(failure),
        })
    }

    /// Same model functions, different exponent or threshold.
    pub fn with_kind(&self, kind: TargetKind) -> Result<Self> {
        match kind {
            TargetKind::Exponent { beta } => {
                Self::exponent(self.prior.clone(), self.likelihood.clone(), beta)
            }
            TargetKind::FailureIndicator { threshold } => Self::failure(
                self.prior.clone(),
                self.failure.clone(),
                self.likelihood.clone(),
                threshold,
            ),
        }
    }

    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn prior(&self) -> &Arc<BlockPrior> {
        &self.prior
    }

    pub fn likelihood(&self) -> Option<&Arc<dyn LogLikelihood>> {
        self.likelihood.as_ref()
    }

    pub fn failure_fn(&self) -> Option<&Arc<dyn FailureFunction>> {
        self.failure.as_ref()
    }

    pub fn needs_likelihood(&self) -> bool {
        self.likelihood.is_some()
    }

    pub fn needs_failure(&self) -> bool {
        matches!(self.kind, TargetKind::FailureIndicator { .. })
    }

    /// Evaluate only what this target needs. Counts model evaluations.
    pub fn evaluate_model(&self, theta: &[f64]) -> ModelEval {
        ModelEval {
            log_like: self.likelihood.as_ref().map(|l| l.log_likelihood(theta)),
            failure_value: match (&self.failure, self.needs_failure()) {
                (Some(f), true) => Some(f.failure_value(theta)),
                _ => None,
            },
        }
    }

    /// Fill in whatever `cached` lacks for this target.
    pub fn complete_model(&self, theta: &[f64], cached: ModelEval) -> ModelEval {
        let mut out = cached;
        if out.log_like.is_none() {
            out.log_like = self.likelihood.as_ref().map(|l| l.log_likelihood(theta));
        }
        if out.failure_value.is_none() && self.needs_failure() {
            out.failure_value = self.failure.as_ref().map(|f| f.failure_value(theta));
        }
        out
    }

    /// Likelihood contribution to the log target.
    pub fn log_like_part(&self, m: &ModelEval) -> f64 {
        match self.kind {
            TargetKind::Exponent { beta } => {
                if beta == 0.0 {
                    0.0
                } else {
                    beta * m.log_like.expect("likelihood evaluated")
                }
            }
            TargetKind::FailureIndicator { .. } => m.log_like.unwrap_or(0.0),
        }
    }

    /// Whether the point lies in the target's support, prior aside.
    pub fn in_domain(&self, m: &ModelEval) -> bool {
        let like_ok = match self.kind {
            TargetKind::Exponent { beta } if beta == 0.0 => true,
            _ => m.log_like.is_none_or(|l| l > f64::NEG_INFINITY),
        };
        let fail_ok = match self.kind {
            TargetKind::FailureIndicator { threshold } => {
                m.failure_value.is_some_and(|f| f >= threshold)
            }
            TargetKind::Exponent { .. } => true,
        };
        like_ok && fail_ok
    }

    pub fn assemble(&self, log_prior: f64, model: ModelEval) -> TargetEval {
        let in_domain = log_prior > f64::NEG_INFINITY && self.in_domain(&model);
        let log_like_part = if in_domain { self.log_like_part(&model) } else { f64::NEG_INFINITY };
        TargetEval { log_prior, log_like_part, in_domain, model }
    }

    /// Checked evaluation of the tempered target at `theta`.
    pub fn log_target(&self, theta: &ParamVector) -> Result<TargetEval> {
        let log_prior = self.prior.log_density(theta)?;
        if log_prior == f64::NEG_INFINITY {
            return Ok(self.assemble(log_prior, ModelEval::default()));
        }
        let model = self.evaluate_model(theta.values());
        Ok(self.assemble(log_prior, model))
    }
}

impl std::fmt::Debug for TemperedTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TemperedTarget")
            .field("kind", &self.kind)
            .field("dim", &self.prior.dim())
            .field("likelihood", &self.likelihood.is_some())
            .field("failure", &self.failure.is_some())
            .finish()
    }
}
