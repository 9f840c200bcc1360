use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{ChainState, ProposalSpec};
use crate::error::{Error, Result};
use crate::prob::TemperedTarget;

/// Which Markov chain kernel evolves the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rwm,
    Mma,
    Romma,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Rwm, KernelKind::Mma, KernelKind::Romma];

    pub fn step<R: Rng + ?Sized>(
        self,
        state: &mut ChainState,
        target: &TemperedTarget,
        prop: &ProposalSpec,
        rng: &mut R,
    ) -> Result<bool> {
        match self {
            KernelKind::Rwm => rwm_step(state, target, prop, rng),
            KernelKind::Mma => mma_step(state, target, prop, rng),
            KernelKind::Romma => romma_step(state, target, prop, rng),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Rwm => "rwm",
            KernelKind::Mma => "mma",
            KernelKind::Romma => "romma",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rwm" => Ok(KernelKind::Rwm),
            "mma" => Ok(KernelKind::Mma),
            "romma" => Ok(KernelKind::Romma),
            other => Err(Error::InvalidConfig(format!("unknown kernel '{other}'"))),
        }
    }
}

fn check_dim(state: &ChainState, prop: &ProposalSpec) -> Result<()> {
    if state.dim() != prop.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), got: prop.dim() });
    }
    Ok(())
}

fn draw_xi<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Metropolis test on a log ratio. Undefined ratios (both densities zero)
/// reject.
fn metropolis(log_ratio: f64, u: f64) -> bool {
    if log_ratio.is_nan() {
        return false;
    }
    log_ratio >= 0.0 || u < log_ratio.exp()
}

/// Final accept/reject shared by all kernels. The model is evaluated at the
/// candidate exactly once. The modified kernels have already filtered the
/// prior in stage 1, so their ratio uses the likelihood part alone.
fn finish<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &TemperedTarget,
    cand: Vec<f64>,
    log_prior: f64,
    moved: &[bool],
    prior_in_ratio: bool,
    rng: &mut R,
) -> bool {
    let u: f64 = rng.random();
    let model = target.evaluate_model(&cand);
    let eval = target.assemble(log_prior, model);
    if !eval.in_domain {
        return false;
    }
    let log_ratio = if prior_in_ratio {
        eval.log_target() - state.log_target()
    } else {
        eval.log_like_part - state.log_like_part
    };
    let accepted = metropolis(log_ratio, u);
    if accepted {
        state.accept(cand, log_prior, model, eval.log_like_part);
        state.counters.accepts += 1;
        for (c, _) in state.counters.through.iter_mut().zip(moved).filter(|(_, m)| **m) {
            *c += 1;
        }
    }
    accepted
}

/// Random-walk Metropolis with candidate `theta + sigma * S * xi`.
///
/// Candidates outside the prior support are rejected without a model
/// evaluation.
pub fn rwm_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &TemperedTarget,
    prop: &ProposalSpec,
    rng: &mut R,
) -> Result<bool> {
    check_dim(state, prop)?;
    let d = state.dim();
    let xi = DVector::from_vec(draw_xi(d, rng));
    let step = prop.sqrt() * xi * prop.sigma();
    let cand: Vec<f64> = state.values().iter().zip(step.iter()).map(|(a, b)| a + b).collect();
    state.counters.steps += 1;
    let lp = target.prior().ln_density(&cand);
    if lp == f64::NEG_INFINITY {
        // keep the number of draws per step fixed
        let _: f64 = rng.random();
        return Ok(false);
    }
    Ok(finish(state, target, cand, lp, &vec![true; d], true, rng))
}

/// Modified Metropolis: component-wise prior filter, then one model
/// evaluation. Requires a diagonal proposal.
pub fn mma_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &TemperedTarget,
    prop: &ProposalSpec,
    rng: &mut R,
) -> Result<bool> {
    check_dim(state, prop)?;
    if !prop.is_diagonal() {
        return Err(Error::NonDiagonalProposal);
    }
    let d = state.dim();
    let xi = draw_xi(d, rng);
    let prior = target.prior();
    let mut cand = state.values().to_vec();
    let mut moved = vec![false; d];
    for j in 0..d {
        let x = cand[j];
        let y = x + prop.sigma() * prop.sqrt()[(j, j)] * xi[j];
        let m = prior.marginal(j);
        let zeta: f64 = rng.random();
        if metropolis(m.ln_pdf(y) - m.ln_pdf(x), zeta) {
            cand[j] = y;
            moved[j] = true;
        }
    }
    state.counters.steps += 1;
    let lp = prior.ln_density(&cand);
    Ok(finish(state, target, cand, lp, &moved, false, rng))
}

/// Rank-one modified Metropolis.
pub fn romma_step<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &TemperedTarget,
    prop: &ProposalSpec,
    rng: &mut R,
) -> Result<bool> {
    let xi = draw_xi(state.dim(), rng);
    romma_step_with_xi(state, target, prop, &xi, rng)
}

/// ROMMA step with a caller-supplied `xi`. The columns of `S` are visited in
/// forward or reverse order with equal probability; each rank-one move is
/// filtered by the full prior ratio.
pub fn romma_step_with_xi<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &TemperedTarget,
    prop: &ProposalSpec,
    xi: &[f64],
    rng: &mut R,
) -> Result<bool> {
    let forward = rng.random::<f64>() < 0.5;
    romma_sweep(state, target, prop, xi, forward, rng)
}

/// ROMMA step with a fixed column order. Only the random order is
/// reversible; a fixed order is exposed for testing.
pub fn romma_sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    target: &TemperedTarget,
    prop: &ProposalSpec,
    xi: &[f64],
    forward: bool,
    rng: &mut R,
) -> Result<bool> {
    check_dim(state, prop)?;
    let d = state.dim();
    if xi.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: xi.len() });
    }
    let prior = target.prior();
    let s = prop.sqrt();
    let sigma = prop.sigma();
    let mut cand = state.values().to_vec();
    let mut lp = state.log_prior();
    let mut trial = vec![0.0; d];
    let mut moved = vec![false; d];
    for (t, &x) in xi.iter().enumerate() {
        let j = if forward { t } else { d - 1 - t };
        let col = s.column(j);
        for i in 0..d {
            trial[i] = cand[i] + sigma * x * col[i];
        }
        let lp_trial = prior.ln_density(&trial);
        let u: f64 = rng.random();
        if metropolis(lp_trial - lp, u) {
            cand.copy_from_slice(&trial);
            lp = lp_trial;
            moved[j] = true;
        }
    }
    state.counters.steps += 1;
    Ok(finish(state, target, cand, lp, &moved, false, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::{BlockPrior, FnLikelihood, LogLikelihood, Marginal};
    use crate::rng::{stream, Purpose};
    use nalgebra::DMatrix;
    use std::sync::Arc;

    fn gauss_target(beta: f64) -> (TemperedTarget, Arc<FnLikelihood<fn(&[f64]) -> f64>>) {
        let prior = Arc::new(BlockPrior::iid("x", 3, Marginal::gaussian(0.0, 1.0).unwrap()).unwrap());
        let f: fn(&[f64]) -> f64 = |t| -0.5 * t.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>();
        let like = Arc::new(FnLikelihood::new(f));
        let l: Arc<dyn LogLikelihood> = like.clone();
        (TemperedTarget::exponent(prior, Some(l), beta).unwrap(), like)
    }

    fn start(target: &TemperedTarget) -> ChainState {
        let theta = target.prior().param(vec![0.1, -0.2, 0.3]).unwrap();
        ChainState::new(theta, target).unwrap()
    }

    #[test]
    fn mma_rejects_full_covariance() {
        let (t, _) = gauss_target(1.0);
        let mut s = start(&t);
        let c = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let p = ProposalSpec::new(c, 1.0).unwrap();
        let mut rng = stream(0, 0, Purpose::Other, 0);
        assert!(matches!(mma_step(&mut s, &t, &p, &mut rng), Err(Error::NonDiagonalProposal)));
    }

    #[test]
    fn one_model_evaluation_per_step() {
        let (t, like) = gauss_target(1.0);
        let p = ProposalSpec::identity(3, 0.5).unwrap();
        for k in KernelKind::ALL {
            let mut s = start(&t);
            let before = like.evaluations();
            let mut rng = stream(1, 0, Purpose::Other, 0);
            for _ in 0..100 {
                k.step(&mut s, &t, &p, &mut rng).unwrap();
            }
            assert_eq!(like.evaluations() - before, 100, "{k}");
        }
    }

    #[test]
    fn rejected_step_leaves_state_unchanged_and_cache_is_fresh() {
        let (t, _) = gauss_target(1.0);
        let p = ProposalSpec::identity(3, 2.0).unwrap();
        for k in KernelKind::ALL {
            let mut s = start(&t);
            let mut rng = stream(2, 0, Purpose::Other, 0);
            for _ in 0..200 {
                let before = s.clone();
                let acc = k.step(&mut s, &t, &p, &mut rng).unwrap();
                if !acc {
                    assert_eq!(before.values(), s.values());
                    assert_eq!(before.log_prior().to_bits(), s.log_prior().to_bits());
                    assert_eq!(before.log_target().to_bits(), s.log_target().to_bits());
                }
                let fresh = t.log_target(s.theta()).unwrap();
                assert_eq!(fresh.log_prior, s.log_prior());
                assert_eq!(fresh.log_target(), s.log_target());
            }
        }
    }

    #[test]
    fn all_stage_one_rejections_accept_current_point() {
        let prior = Arc::new(BlockPrior::iid("x", 2, Marginal::uniform(0.0, 1.0).unwrap()).unwrap());
        let l: Arc<dyn LogLikelihood> = Arc::new(FnLikelihood::new(|t: &[f64]| -t[0]));
        let t = TemperedTarget::exponent(prior.clone(), Some(l), 1.0).unwrap();
        let p = ProposalSpec::identity(2, 1e6).unwrap();
        for k in [KernelKind::Mma, KernelKind::Romma] {
            let mut s = ChainState::new(prior.param(vec![0.5, 0.5]).unwrap(), &t).unwrap();
            let mut rng = stream(3, 0, Purpose::Other, 0);
            assert!(k.step(&mut s, &t, &p, &mut rng).unwrap());
            assert_eq!(s.values(), &[0.5, 0.5]);
            assert_eq!(s.counters.through, vec![0, 0]);
        }
    }

    #[test]
    fn romma_zero_xi_is_identity_move() {
        let (t, _) = gauss_target(1.0);
        let p = ProposalSpec::identity(3, 1.0).unwrap();
        let mut s = start(&t);
        let mut rng = stream(4, 0, Purpose::Other, 0);
        let before = s.values().to_vec();
        assert!(romma_step_with_xi(&mut s, &t, &p, &[0.0; 3], &mut rng).unwrap());
        assert_eq!(s.values(), before.as_slice());
    }

    #[test]
    fn rwm_outside_support_skips_model() {
        let prior = Arc::new(BlockPrior::iid("x", 1, Marginal::exponential(1.0).unwrap()).unwrap());
        let like = Arc::new(FnLikelihood::new(|_: &[f64]| 0.0));
        let l: Arc<dyn LogLikelihood> = like.clone();
        let t = TemperedTarget::exponent(prior.clone(), Some(l), 1.0).unwrap();
        let mut s = ChainState::new(prior.param(vec![1e-9]).unwrap(), &t).unwrap();
        let p = ProposalSpec::identity(1, 5.0).unwrap();
        let mut rng = stream(5, 0, Purpose::Other, 0);
        let mut negatives = 0;
        for _ in 0..200 {
            let before = like.evaluations();
            let x0 = s.values()[0];
            k_step(&mut s, &t, &p, &mut rng);
            if like.evaluations() == before {
                negatives += 1;
                assert_eq!(s.values()[0], x0);
            }
        }
        assert!(negatives > 0);

        fn k_step<R: Rng>(s: &mut ChainState, t: &TemperedTarget, p: &ProposalSpec, r: &mut R) {
            rwm_step(s, t, p, r).unwrap();
        }
    }

    #[test]
    fn kernel_names_round_trip() {
        for k in KernelKind::ALL {
            assert_eq!(k.name().parse::<KernelKind>().unwrap(), k);
        }
        assert!("gibbs".parse::<KernelKind>().is_err());
    }
}
