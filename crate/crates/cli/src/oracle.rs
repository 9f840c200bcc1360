//! Closed-form references for the synthetic models.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailReference {
    pub threshold: f64,
    pub probability: f64,
    /// Levels a subset run with level probability 1/2 should need.
    pub expected_levels: u32,
}

/// `P(Z >= threshold)` for a standard normal `Z`.
pub fn gaussian_tail(threshold: f64) -> TailReference {
    let probability = Normal::standard().sf(threshold);
    TailReference {
        threshold,
        probability,
        expected_levels: (1.0 / probability).log2().ceil().max(1.0) as u32,
    }
}

/// Log marginal likelihood of i.i.d. `N(theta, noise_sd^2)` data under a
/// `N(prior_mean, prior_sd^2)` prior on `theta`.
pub fn conjugate_log_evidence(prior_mean: f64, prior_sd: f64, noise_sd: f64, data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let (s2, t2) = (noise_sd * noise_sd, prior_sd * prior_sd);
    let r: Vec<f64> = data.iter().map(|y| y - prior_mean).collect();
    let sum: f64 = r.iter().sum();
    let sq: f64 = r.iter().map(|v| v * v).sum();
    // covariance s2 I + t2 11'
    let log_det = n * s2.ln() + (1.0 + n * t2 / s2).ln();
    let quad = sq / s2 - t2 * sum * sum / (s2 * (s2 + n * t2));
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + log_det + quad)
}
