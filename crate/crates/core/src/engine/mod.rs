//! Population-level machinery: tempering, thresholds, resampling, chain
//! evolution and the three pipelines built on them.

mod controller;
mod correlation;
mod ess;
mod evolve;
mod population;
mod resample;
mod schedule;
mod subset;
mod threshold;
mod updating;
mod weights;

pub use controller::{Controller, SIGMA_MAX, SIGMA_MIN};
pub use correlation::{corr_cca, corr_componentwise, corr_log_target, CorrEstimate, CorrMeasure};
pub use ess::{predict_ess, simulate_ess, EssPrediction, EssSimulation};
pub use evolve::{evolve_level, EvolveOptions, EvolveReport};
pub use population::Population;
pub use resample::{multinomial_indices, replicate_indices};
pub use schedule::{estimate_evidence, LevelRecord, LevelSchedule, Stage};
pub use subset::{
    group_gamma, run_posterior_reliability, run_prior_subset, run_subset, PosteriorReliability,
    SubsetConfig, SubsetResult,
};
pub use threshold::{solve_failure_threshold, LevelThreshold};
pub use updating::{run_updating, SamplerConfig, UpdatingConfig, UpdatingResult};
pub use weights::{kish_ess, log_mean_exp, normalized_weights, solve_delta_beta, weight_cov};
