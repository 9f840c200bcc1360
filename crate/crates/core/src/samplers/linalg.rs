use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric square root `S` with `S * S^T = cov`.
///
/// Negative eigenvalues from round-off are clamped to zero.
pub fn matrix_sqrt(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !cov.is_square() {
        return Err(Error::InvalidProposal(format!(
            "covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidProposal("covariance has non-finite entries".into()));
    }
    let scale = cov.amax().max(1.0);
    let asym = (cov - cov.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

fn normalise(weights: &[f64]) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::ZeroWeights);
    }
    Ok(weights.iter().map(|w| w / total).collect())
}

pub fn weighted_mean(samples: &[&[f64]], weights: &[f64]) -> Result<DVector<f64>> {
    check_shapes(samples, weights)?;
    let w = normalise(weights)?;
    let d = samples[0].len();
    let mut mean = DVector::zeros(d);
    for (x, &wi) in samples.iter().zip(&w) {
        if wi > 0.0 {
            for j in 0..d {
                mean[j] += wi * x[j];
            }
        }
    }
    Ok(mean)
}

fn check_shapes(samples: &[&[f64]], weights: &[f64]) -> Result<()> {
    if samples.is_empty() {
        return Err(Error::InvalidWeights("no samples".into()));
    }
    if samples.len() != weights.len() {
        return Err(Error::DimensionMismatch { expected: samples.len(), got: weights.len() });
    }
    let d = samples[0].len();
    if let Some(x) = samples.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    Ok(())
}

/// Weighted covariance with normalised weights (divisor 1, not `1 - sum w^2`),
/// plus a diagonal jitter of `1e-10 * trace / d`.
pub fn weighted_covariance(samples: &[&[f64]], weights: &[f64]) -> Result<DMatrix<f64>> {
    let mean = weighted_mean(samples, weights)?;
    let w = normalise(weights)?;
    let d = mean.len();
    let mut cov = DMatrix::zeros(d, d);
    let mut dev = DVector::zeros(d);
    for (x, &wi) in samples.iter().zip(&w) {
        if wi == 0.0 {
            continue;
        }
        for j in 0..d {
            dev[j] = x[j] - mean[j];
        }
        cov.syger(wi, &dev, &dev, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    let jitter = 1e-10 * cov.trace() / d as f64;
    for j in 0..d {
        cov[(j, j)] += jitter;
    }
    Ok(cov)
}
