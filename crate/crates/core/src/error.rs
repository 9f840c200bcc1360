use thiserror::Error;

/// Errors raised by the sampling engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite parameter value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("invalid block layout: {0}")]
    InvalidLayout(String),

    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),

    #[error("exponent target with beta = {beta} needs a likelihood")]
    MissingLikelihood { beta: f64 },

    #[error("failure-indicator target needs a failure function")]
    MissingFailureFunction,

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("all weights are zero")]
    ZeroWeights,

    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    #[error("modified Metropolis needs a diagonal proposal")]
    NonDiagonalProposal,

    #[error("invalid proposal: {0}")]
    InvalidProposal(String),

    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),

    #[error("level cap of {cap} reached (current threshold {beta}); probability too small for the budget")]
    LevelCapExceeded { cap: usize, beta: f64 },

    #[error("missing level records: {0}")]
    MissingLevels(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
