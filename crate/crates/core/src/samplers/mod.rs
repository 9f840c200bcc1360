//! Markov chain kernels and proposal construction.
//!
//! All three kernels target a [`TemperedTarget`](crate::prob::TemperedTarget)
//! and share the same candidate convention `theta + sigma * S * xi` with one
//! standard normal vector `xi` drawn per step.

mod kernels;
mod linalg;
mod proposal;
mod state;

pub use kernels::{mma_step, romma_step, romma_step_with_xi, romma_sweep, rwm_step, KernelKind};
pub use linalg::{matrix_sqrt, weighted_covariance, weighted_mean};
pub use proposal::ProposalSpec;
pub use state::{AcceptanceStats, ChainCounters, ChainState};
