//! Sequential tempered MCMC.
//!
//! A population of `N` samples is moved from the prior towards a target
//! distribution through a sequence of intermediate distributions. Each level
//! reweights the population, resamples it and then decorrelates the copies
//! with a Metropolis-type kernel. Two families of intermediate distributions
//! are supported:
//!
//! * likelihood tempering, `p(D|θ)^β p(θ)` with `β` climbing from 0 to 1
//!   (Bayesian updating, model evidence), and
//! * nested failure domains, `1{f(θ) ≥ β} p(θ)` with `β` climbing towards 1
//!   (subset simulation for rare-event probabilities).
//!
//! Both can be chained to estimate posterior failure probabilities.
//!
//! The MCMC step can use random-walk Metropolis, the modified Metropolis
//! algorithm (component-wise prior filtering) or the rank-one modified
//! Metropolis algorithm, which filters rank-one moves along the columns of
//! the proposal square root through the prior before the likelihood is ever
//! evaluated.

pub mod engine;
pub mod error;
pub mod prob;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
