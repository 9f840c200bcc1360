use crate::error::{Error, Result};

/// Intermediate failure threshold for one subset level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelThreshold {
    /// Threshold, clamped to 1 on the final level.
    pub beta: f64,
    /// Indices of samples at or above the threshold that seed the next level.
    pub survivors: Vec<usize>,
    /// `survivors.len() / N`.
    pub fraction: f64,
    pub is_final: bool,
    /// Ties forced the non-strict rule `f >= beta`.
    pub ties: bool,
}

/// Threshold at the `ceil((1 - kappa) N)`-th order statistic of the failure
/// values. Survivors are those strictly above it, unless ties leave fewer
/// than `kappa N` of them, in which case equality is admitted.
pub fn solve_failure_threshold(values: &[f64], kappa: f64) -> Result<LevelThreshold> {
    let n = values.len();
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidConfig(format!("level probability {kappa} outside (0, 1)")));
    }
    if (kappa * n as f64) < 1.0 {
        return Err(Error::InvalidConfig(format!(
            "level probability {kappa} leaves no survivors out of {n}"
        )));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::DegeneratePopulation("failure values contain NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let j = ((1.0 - kappa) * n as f64).ceil() as usize;
    let j = j.clamp(1, n);
    let order_stat = sorted[j - 1];
    if order_stat >= 1.0 {
        let survivors: Vec<usize> = (0..n).filter(|&i| values[i] >= 1.0).collect();
        return Ok(LevelThreshold {
            beta: 1.0,
            fraction: survivors.len() as f64 / n as f64,
            survivors,
            is_final: true,
            ties: false,
        });
    }
    let distinct = sorted.windows(2).filter(|w| w[0] != w[1]).count() + 1;
    if distinct < 2 {
        return Err(Error::DegeneratePopulation(
            "failure values are all equal; the population cannot progress".into(),
        ));
    }
    let strict: Vec<usize> = (0..n).filter(|&i| values[i] > order_stat).collect();
    let (survivors, ties) = if strict.len() >= n - j && !strict.is_empty() {
        (strict, false)
    } else {
        ((0..n).filter(|&i| values[i] >= order_stat).collect(), true)
    };
    Ok(LevelThreshold {
        beta: order_stat,
        fraction: survivors.len() as f64 / n as f64,
        survivors,
        is_final: false,
        ties,
    })
}
