use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::{corr_cca, corr_componentwise, corr_log_target, CorrMeasure};
use super::Population;
use crate::error::Result;
use crate::prob::TemperedTarget;
use crate::rng::{streams, Purpose};
use crate::samplers::{AcceptanceStats, KernelKind, ProposalSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveOptions {
    /// Stop once the start/end correlation is at or below this.
    pub rho_target: f64,
    /// Steps between correlation checks.
    pub block: usize,
    /// Hard cap on steps per chain.
    pub max_steps: usize,
    pub measure: CorrMeasure,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self { rho_target: 0.6, block: 5, max_steps: 200, measure: CorrMeasure::Cca }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolveReport {
    pub stats: AcceptanceStats,
    pub steps: usize,
    pub correlation: f64,
    pub fallback: bool,
    pub cap_hit: bool,
}

/// Advance every chain in blocks of `opts.block` steps until the correlation
/// with the starting points drops to `opts.rho_target` or the cap is hit.
///
/// Chain `i` at `level` always draws from the same random stream, so the
/// outcome does not depend on the number of worker threads.
pub fn evolve_level(
    pop: &mut Population,
    target: &TemperedTarget,
    kernel: KernelKind,
    prop: &ProposalSpec,
    opts: &EvolveOptions,
    seed: u64,
    level: usize,
) -> Result<EvolveReport> {
    let block = opts.block.max(1);
    let start: Vec<Vec<f64>> = pop.chains.iter().map(|c| c.values().to_vec()).collect();
    let start_lt = pop.log_targets();
    let mut rngs: Vec<ChaCha8Rng> = streams(seed, level, Purpose::Evolve, pop.len());
    pop.chains.iter_mut().for_each(|c| c.counters.reset());

    let mut steps = 0;
    loop {
        let n_steps = block.min(opts.max_steps - steps).max(1);
        pop.chains
            .par_iter_mut()
            .zip(rngs.par_iter_mut())
            .try_for_each(|(c, rng)| -> Result<()> {
                for _ in 0..n_steps {
                    kernel.step(c, target, prop, rng)?;
                }
                Ok(())
            })?;
        steps += n_steps;

        let est = match opts.measure {
            CorrMeasure::LogTarget => corr_log_target(&start_lt, &pop.log_targets())?,
            CorrMeasure::Cca | CorrMeasure::Componentwise => {
                let s: Vec<&[f64]> = start.iter().map(Vec::as_slice).collect();
                let e = pop.samples();
                if opts.measure == CorrMeasure::Cca {
                    corr_cca(&s, &e)?
                } else {
                    corr_componentwise(&s, &e)?
                }
            }
        };
        let done = est.value <= opts.rho_target;
        if done || steps >= opts.max_steps {
            return Ok(EvolveReport {
                stats: AcceptanceStats::from_chains(&pop.chains),
                steps,
                correlation: est.value,
                fallback: est.fallback,
                cap_hit: !done,
            });
        }
    }
}
