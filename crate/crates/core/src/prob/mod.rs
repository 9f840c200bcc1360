//! Priors, likelihoods and tempered targets.

mod likelihood;
mod marginal;
mod prior;
mod target;

pub use likelihood::{EvalCounter, FailureFunction, FnFailure, FnLikelihood, LogLikelihood};
pub use marginal::Marginal;
pub use prior::{Block, BlockLayout, BlockPrior, ParamVector};
pub use target::{ModelEval, TargetEval, TargetKind, TemperedTarget};
