use nalgebra::DMatrix;

use super::linalg::matrix_sqrt;
use crate::error::{Error, Result};

/// Proposal covariance `sigma^2 * cov`, stored with its square root.
#[derive(Debug, Clone)]
pub struct ProposalSpec {
    cov: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    sigma: f64,
    diagonal: bool,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma.is_finite() && sigma > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidProposal(format!("scale {sigma} must be positive")))
    }
}

impl ProposalSpec {
    pub fn new(cov: DMatrix<f64>, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        let diagonal = cov.is_square()
            && (0..cov.nrows()).all(|i| (0..cov.ncols()).all(|j| i == j || cov[(i, j)] == 0.0));
        let sqrt = if diagonal && cov.diagonal().iter().all(|v| v.is_finite() && *v >= 0.0) {
            DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt))
        } else {
            matrix_sqrt(&cov)?
        };
        Ok(Self { cov, sqrt, sigma, diagonal })
    }

    pub fn diagonal(variances: &[f64], sigma: f64) -> Result<Self> {
        if variances.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidProposal("variances must be finite and non-negative".into()));
        }
        let v = nalgebra::DVector::from_column_slice(variances);
        Self::new(DMatrix::from_diagonal(&v), sigma)
    }

    /// Keep only the diagonal of `cov`.
    pub fn diagonal_of(cov: &DMatrix<f64>, sigma: f64) -> Result<Self> {
        let v: Vec<f64> = cov.diagonal().iter().copied().collect();
        Self::diagonal(&v, sigma)
    }

    pub fn identity(dim: usize, sigma: f64) -> Result<Self> {
        Self::diagonal(&vec![1.0; dim], sigma)
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        Ok(Self { sigma, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.sqrt
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }
}
