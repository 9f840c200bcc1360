use crate::error::{Error, Result};

const BISECTION_ITERS: usize = 60;
const BISECTION_TOL: f64 = 1e-8;

/// `log(mean(exp(x)))` computed on max-shifted values.
pub fn log_mean_exp(x: &[f64]) -> f64 {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || x.is_empty() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = x.iter().map(|v| (v - m).exp()).sum();
    m + (s / x.len() as f64).ln()
}

fn scaled(log_likes: &[f64], dbeta: f64) -> Vec<f64> {
    log_likes
        .iter()
        .map(|&l| if dbeta == 0.0 { 0.0 } else if l == f64::NEG_INFINITY { l } else { dbeta * l })
        .collect()
}

/// Sample coefficient of variation of `exp(log_w)` (standard deviation with
/// divisor N over the mean).
pub fn weight_cov(log_w: &[f64]) -> f64 {
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NAN;
    }
    let w: Vec<f64> = log_w.iter().map(|v| (v - m).exp()).collect();
    let n = w.len() as f64;
    let mean = w.iter().sum::<f64>() / n;
    let var = w.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    var.sqrt() / mean
}

/// Weights proportional to `exp(log_w)`, summing to one.
pub fn normalized_weights(log_w: &[f64]) -> Result<Vec<f64>> {
    if log_w.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidWeights("log weights contain NaN or +inf".into()));
    }
    let m = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::ZeroWeights);
    }
    let w: Vec<f64> = log_w.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / s).collect())
}

/// Kish effective sample size of normalised weights.
pub fn kish_ess(w: &[f64]) -> f64 {
    1.0 / w.iter().map(|x| x * x).sum::<f64>()
}

/// Exponent increment whose plausibility weights have sample COV `kappa_star`,
/// or `cap` when even the full increment stays below it.
pub fn solve_delta_beta(log_likes: &[f64], kappa_star: f64, cap: f64) -> Result<f64> {
    if !(kappa_star.is_finite() && kappa_star > 0.0) {
        return Err(Error::InvalidConfig(format!("target COV {kappa_star} must be positive")));
    }
    if !(cap > 0.0 && cap <= 1.0) {
        return Err(Error::InvalidConfig(format!("exponent cap {cap} outside (0, 1]")));
    }
    if log_likes.is_empty() {
        return Err(Error::DegeneratePopulation("empty population".into()));
    }
    if log_likes.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::InvalidWeights("log-likelihoods contain NaN or +inf".into()));
    }
    if log_likes.iter().all(|v| *v == f64::NEG_INFINITY) {
        return Err(Error::DegeneratePopulation("every log-likelihood is -inf".into()));
    }
    let g = |x: f64| weight_cov(&scaled(log_likes, x)) - kappa_star;
    if g(cap) <= 0.0 {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (0.0, cap);
    let mut mid = 0.5 * cap;
    for _ in 0..BISECTION_ITERS {
        mid = 0.5 * (lo + hi);
        let v = g(mid);
        if v.abs() < BISECTION_TOL {
            break;
        }
        if v > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(mid)
}

/// Incremental log weights `dbeta * log_like` with `-inf` preserved.
pub(crate) fn incremental_log_weights(log_likes: &[f64], dbeta: f64) -> Vec<f64> {
    scaled(log_likes, dbeta)
}
