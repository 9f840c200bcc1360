//! Steady-state hydraulics of looped water networks with leaks, and the
//! failure function and head likelihood built on them.
//!
//! Flows are solved with Newton's method on the loop formulation: one mass
//! balance per junction, one energy equation per independent loop and one
//! head equation per leak. Each pipe carries a leak at a fractional position
//! along its length whose outflow grows with the square root of the local
//! head. Friction losses follow Hazen-Williams.
//!
//! Units: heads in metres, lengths and diameters in metres, flows in m3/s
//! internally. Demands are given in m3/h and reported flows are in m3/h.

mod data;
mod error;
mod model;
mod network;
mod solver;

pub use data::{synthetic_dataset, Case, Condition, Dataset, Observation};
pub use error::{HydroError, Result};
pub use model::{failure_from_head, HeadLikelihood, WaterModel, DEMAND_BLOCK, LEAK_POS_BLOCK, LEAK_SIZE_BLOCK};
pub use network::{
    hanoi, load_network, HazenWilliams, Network, NetworkSpec, NodeSpec, PipeSpec, ReservoirSpec,
    HANOI_JSON,
};
pub use solver::{residuals, solve_network, HydraulicState, LeakParams, Residuals, SolveOptions};
