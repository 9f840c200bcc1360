use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use stmcmc::prob::{BlockPrior, EvalCounter, FailureFunction, LogLikelihood, Marginal};

use crate::data::Dataset;
use crate::error::{HydroError, Result};
use crate::network::Network;
use crate::solver::{solve_network, HydraulicState, LeakParams, SolveOptions};

pub const DEMAND_BLOCK: &str = "demand";
pub const LEAK_SIZE_BLOCK: &str = "leak_size";
pub const LEAK_POS_BLOCK: &str = "leak_pos";

/// Maps a parameter vector `[demand factors | leak sizes | leak positions]`
/// onto network solves.
pub struct WaterModel {
    net: Arc<Network>,
    opts: SolveOptions,
    solves: EvalCounter,
    diverged: AtomicU64,
}

impl WaterModel {
    pub fn new(net: Arc<Network>) -> Self {
        Self::with_options(net, SolveOptions::default())
    }

    pub fn with_options(net: Arc<Network>, opts: SolveOptions) -> Self {
        Self { net, opts, solves: EvalCounter::new(), diverged: AtomicU64::new(0) }
    }

    pub fn network(&self) -> &Arc<Network> {
        &self.net
    }

    pub fn dim(&self) -> usize {
        self.net.n_junctions() + 2 * self.net.n_pipes()
    }

    /// Demand factor N(0.75, 0.15), leak size Exponential(mean 0.002),
    /// leak position Uniform(0, 1).
    pub fn prior(&self) -> BlockPrior {
        let nj = self.net.n_junctions();
        let np = self.net.n_pipes();
        BlockPrior::from_blocks([
            (DEMAND_BLOCK, nj, Marginal::Gaussian { mean: 0.75, sd: 0.15 }),
            (LEAK_SIZE_BLOCK, np, Marginal::Exponential { mean: 0.002 }),
            (LEAK_POS_BLOCK, np, Marginal::Uniform { lo: 0.0, hi: 1.0 }),
        ])
        .expect("valid prior blocks")
    }

    pub fn demands<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[..self.net.n_junctions()]
    }

    pub fn leaks(&self, theta: &[f64]) -> Vec<LeakParams> {
        leaks_of(&self.net, theta)
    }

    /// Parameter vector with the given demands and leaks.
    pub fn pack(&self, demand_factors: &[f64], leaks: &[LeakParams]) -> Vec<f64> {
        let mut v = demand_factors.to_vec();
        v.extend(leaks.iter().map(|l| l.coeff));
        v.extend(leaks.iter().map(|l| l.position));
        v
    }

    /// One counted solve at the demands and leaks encoded in `theta`.
    pub fn solve(&self, theta: &[f64]) -> Result<HydraulicState> {
        self.check(theta)?;
        self.solves.add(1);
        let st = solve_network(&self.net, self.demands(theta), &self.leaks(theta), &self.opts)?;
        if !st.converged {
            self.diverged.fetch_add(1, Ordering::Relaxed);
        }
        Ok(st)
    }

    /// Solves that ended without convergence.
    pub fn diverged(&self) -> u64 {
        self.diverged.load(Ordering::Relaxed)
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(HydroError::Dimension { what: "parameter vector", expected: self.dim(), got: theta.len() });
        }
        Ok(())
    }
}

/// `2 - min_head / required`: at least 1 exactly when the minimum head is at
/// or below the requirement.
pub fn failure_from_head(min_head: f64, required: f64) -> f64 {
    2.0 - min_head / required
}

fn leaks_of(net: &Network, theta: &[f64]) -> Vec<LeakParams> {
    let nj = net.n_junctions();
    let np = net.n_pipes();
    (0..np)
        .map(|k| LeakParams { coeff: theta[nj + k], position: theta[nj + np + k] })
        .collect()
}

/// `2 - min_head / min_required_head`; failure when at least 1. A solve that
/// does not converge counts as failed (`+inf`).
impl FailureFunction for WaterModel {
    fn failure_value(&self, theta: &[f64]) -> f64 {
        match self.solve(theta) {
            Ok(st) if st.converged => failure_from_head(st.min_head(), self.net.min_head()),
            _ => f64::INFINITY,
        }
    }

    fn evaluations(&self) -> u64 {
        self.solves.get()
    }
}

/// Gaussian likelihood of observed junction heads under known demand
/// conditions. Only the leak blocks of the parameter vector are used; each
/// condition's demands come from the data set. Every call solves the
/// network once per condition.
pub struct HeadLikelihood {
    net: Arc<Network>,
    opts: SolveOptions,
    /// Per condition: demand factors and (junction index, observed head).
    conditions: Vec<(Vec<f64>, Vec<(usize, f64)>)>,
    sigma: f64,
    solves: EvalCounter,
}

impl HeadLikelihood {
    pub fn new(net: Arc<Network>, data: &Dataset, sigma_m: f64) -> Result<Self> {
        if !(sigma_m.is_finite() && sigma_m > 0.0) {
            return Err(HydroError::Data(format!("observation sigma {sigma_m} must be positive")));
        }
        data.validate(&net)?;
        let conditions = data
            .conditions
            .iter()
            .map(|c| {
                let obs = data
                    .observations
                    .iter()
                    .filter(|o| o.condition_id == c.id)
                    .map(|o| (net.junction_index(o.node_id).expect("validated"), o.observed_head_m))
                    .collect();
                (c.demand_factors.clone(), obs)
            })
            .collect();
        Ok(Self { net, opts: SolveOptions::default(), conditions, sigma: sigma_m, solves: EvalCounter::new() })
    }

    pub fn n_conditions(&self) -> usize {
        self.conditions.len()
    }
}

impl LogLikelihood for HeadLikelihood {
    fn log_likelihood(&self, theta: &[f64]) -> f64 {
        if theta.len() != self.net.n_junctions() + 2 * self.net.n_pipes() {
            return f64::NEG_INFINITY;
        }
        let leaks = leaks_of(&self.net, theta);
        let norm = -(self.sigma.ln() + 0.5 * (2.0 * std::f64::consts::PI).ln());
        let mut total = 0.0;
        for (factors, obs) in &self.conditions {
            self.solves.add(1);
            let st = match solve_network(&self.net, factors, &leaks, &self.opts) {
                Ok(st) if st.converged => st,
                _ => return f64::NEG_INFINITY,
            };
            for &(j, h) in obs {
                let z = (h - st.node_heads_m[j]) / self.sigma;
                total += norm - 0.5 * z * z;
            }
        }
        total
    }

    fn evaluations(&self) -> u64 {
        self.solves.get()
    }
}
