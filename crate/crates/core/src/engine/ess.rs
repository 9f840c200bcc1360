use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::resample::multinomial_indices;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssPrediction {
    /// `n_0 = N, n_1, ...`
    pub trajectory: Vec<f64>,
    /// Large-`N` limit `N (1 - (1 + kappa^2) rho^2)`, or 0 when learning stops.
    pub fixed_point: f64,
    /// Whether the effective size stays bounded away from zero.
    pub learning: bool,
}

/// Effective-sample-size recursion for resample-then-move levels with weight
/// COV `kappa` and chain correlation `rho`:
/// `n_{k+1} = n_k N / ((N - 1)(1 + kappa^2) rho^2 + n_k)`.
pub fn predict_ess(kappa: f64, rho: f64, n: usize, levels: usize) -> Result<EssPrediction> {
    if !(kappa >= 0.0 && kappa.is_finite()) || !(0.0..=1.0).contains(&rho.abs()) || n < 2 {
        return Err(Error::InvalidConfig(format!(
            "ESS prediction needs kappa >= 0, |rho| <= 1, N >= 2 (got {kappa}, {rho}, {n})"
        )));
    }
    let nf = n as f64;
    let a = (1.0 + kappa * kappa) * rho * rho;
    let mut traj = vec![nf];
    for _ in 0..levels {
        let nk = *traj.last().unwrap();
        traj.push(nk * nf / ((nf - 1.0) * a + nk));
    }
    let learning = a < 1.0;
    let fixed_point = if learning { nf * (1.0 - a) } else { 0.0 };
    Ok(EssPrediction { trajectory: traj, fixed_point, learning })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EssSimulation {
    /// Effective sample size of the population mean after each level.
    pub per_level: Vec<f64>,
    /// Pooled over the second half of the levels.
    pub stationary: f64,
}

/// Monte Carlo check of [`predict_ess`] on a two-coordinate standard normal
/// population. Each level shifts the target by `sqrt(ln(1 + kappa^2))` along
/// the first coordinate, so the importance weights have COV `kappa` and are
/// shared by relatives; the population is resampled multinomially and moved
/// by an exact AR(1) kernel with correlation `rho` towards the new target.
/// The effective size is `1 / var(mean)` of the second coordinate, which the
/// weights do not see directly, over `reps` independent runs.
pub fn simulate_ess(
    n: usize,
    kappa: f64,
    rho: f64,
    levels: usize,
    reps: usize,
    seed: u64,
) -> Result<EssSimulation> {
    if n < 2 || reps < 2 || levels == 0 {
        return Err(Error::InvalidConfig("ESS simulation needs N, reps >= 2 and levels >= 1".into()));
    }
    let s = (1.0 + kappa * kappa).ln().sqrt();
    let innov = (1.0 - rho * rho).max(0.0).sqrt();
    let means: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut rng = stream(seed, 0, Purpose::Other, r as u64);
            let mut x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let mut out = Vec::with_capacity(levels);
            for _ in 0..levels {
                let w: Vec<f64> = x.iter().map(|v| (s * v).exp()).collect();
                let idx = multinomial_indices(&w, n, &mut rng)?;
                let mut move_ar = |v: f64| rho * v + innov * rng.sample::<f64, _>(StandardNormal);
                // recentred so the new target is again standard normal
                x = idx.iter().map(|&i| move_ar(x[i] - s)).collect();
                y = idx.iter().map(|&i| move_ar(y[i])).collect();
                out.push(y.iter().sum::<f64>() / n as f64);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let var_at = |k: usize| {
        let m = means.iter().map(|v| v[k]).sum::<f64>() / reps as f64;
        means.iter().map(|v| (v[k] - m).powi(2)).sum::<f64>() / (reps as f64 - 1.0)
    };
    let vars: Vec<f64> = (0..levels).map(var_at).collect();
    let tail = &vars[levels / 2..];
    let pooled = tail.iter().sum::<f64>() / tail.len() as f64;
    Ok(EssSimulation {
        per_level: vars.iter().map(|v| 1.0 / v).collect(),
        stationary: 1.0 / pooled,
    })
}
