use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prob::{ParamVector, TemperedTarget};
use crate::rng::{stream, Purpose};
use crate::samplers::ChainState;

/// A set of chains with importance weights and the index of the parent each
/// chain was copied from.
#[derive(Debug, Clone)]
pub struct Population {
    pub chains: Vec<ChainState>,
    /// Normalised weights; uniform after resampling.
    pub weights: Vec<f64>,
    /// Parent index at the most recent resampling (own index initially).
    pub lineage: Vec<usize>,
}

impl Population {
    pub fn from_states(chains: Vec<ChainState>) -> Result<Self> {
        if chains.is_empty() {
            return Err(Error::DegeneratePopulation("empty population".into()));
        }
        let n = chains.len();
        Ok(Self { chains, weights: vec![1.0 / n as f64; n], lineage: (0..n).collect() })
    }

    /// `n` independent prior draws evaluated under `target`.
    pub fn from_prior(target: &TemperedTarget, n: usize, seed: u64) -> Result<Self> {
        let prior = target.prior();
        let chains = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, 0, Purpose::Init, i as u64);
                ChainState::new(prior.sample(&mut rng), target)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(chains)
    }

    /// Chains started at given points.
    pub fn from_points(points: Vec<ParamVector>, target: &TemperedTarget) -> Result<Self> {
        let chains = points
            .into_par_iter()
            .map(|p| ChainState::new(p, target))
            .collect::<Result<Vec<_>>>()?;
        Self::from_states(chains)
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.chains[0].dim()
    }

    pub fn samples(&self) -> Vec<&[f64]> {
        self.chains.iter().map(ChainState::values).collect()
    }

    pub fn log_likes(&self) -> Result<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| {
                c.log_like()
                    .ok_or_else(|| Error::DegeneratePopulation("log-likelihood not evaluated".into()))
            })
            .collect()
    }

    pub fn failure_values(&self) -> Result<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| {
                c.failure_value()
                    .ok_or_else(|| Error::DegeneratePopulation("failure value not evaluated".into()))
            })
            .collect()
    }

    pub fn log_targets(&self) -> Vec<f64> {
        self.chains.iter().map(ChainState::log_target).collect()
    }

    /// New equally weighted population made of copies of `indices`.
    pub fn resampled(&self, indices: &[usize]) -> Self {
        let n = indices.len();
        Self {
            chains: indices.iter().map(|&i| self.chains[i].clone()).collect(),
            weights: vec![1.0 / n as f64; n],
            lineage: indices.to_vec(),
        }
    }

    /// Point every chain at `target`, evaluating missing model outputs.
    pub fn retarget(&mut self, target: &TemperedTarget) {
        self.chains.par_iter_mut().for_each(|c| c.retarget(target));
    }

    /// Weighted mean of each component.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (c, w) in self.chains.iter().zip(&self.weights) {
            for (acc, x) in m.iter_mut().zip(c.values()) {
                *acc += w * x;
            }
        }
        m
    }
}
