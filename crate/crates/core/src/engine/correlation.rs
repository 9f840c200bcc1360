use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How correlation between the start and the end of a level is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrMeasure {
    /// Largest canonical correlation between start and end points.
    Cca,
    /// Pearson correlation of the log target at start and end.
    LogTarget,
    /// Largest absolute per-component Pearson correlation.
    Componentwise,
}

impl fmt::Display for CorrMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrMeasure::Cca => "cca",
            CorrMeasure::LogTarget => "log-target",
            CorrMeasure::Componentwise => "componentwise",
        })
    }
}

impl FromStr for CorrMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cca" => Ok(CorrMeasure::Cca),
            "log-target" | "log_target" | "loglike" => Ok(CorrMeasure::LogTarget),
            "componentwise" => Ok(CorrMeasure::Componentwise),
            other => Err(Error::InvalidConfig(format!("unknown correlation measure '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrEstimate {
    pub value: f64,
    /// A fallback was used (singular covariance or zero variance).
    pub fallback: bool,
}

fn check(start: &[&[f64]], end: &[&[f64]]) -> Result<(usize, usize)> {
    if start.len() != end.len() {
        return Err(Error::DimensionMismatch { expected: start.len(), got: end.len() });
    }
    if start.len() < 2 {
        return Err(Error::DegeneratePopulation("need at least two chains".into()));
    }
    let d = start[0].len();
    for x in start.iter().chain(end) {
        if x.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len() });
        }
    }
    Ok((start.len(), d))
}

fn centered(rows: &[&[f64]], d: usize) -> DMatrix<f64> {
    let n = rows.len();
    let mut m = DMatrix::from_fn(n, d, |i, j| rows[i][j]);
    for j in 0..d {
        let mean = m.column(j).mean();
        m.column_mut(j).add_scalar_mut(-mean);
    }
    m
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        None
    } else {
        Some(sxy / (sxx * syy).sqrt())
    }
}

/// Largest absolute per-component correlation between start and end.
pub fn corr_componentwise(start: &[&[f64]], end: &[&[f64]]) -> Result<CorrEstimate> {
    let (n, d) = check(start, end)?;
    let mut best: Option<f64> = None;
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..d {
        for i in 0..n {
            x[i] = start[i][j];
            y[i] = end[i][j];
        }
        if let Some(r) = pearson(&x, &y) {
            best = Some(best.map_or(r.abs(), |b: f64| b.max(r.abs())));
        }
    }
    Ok(match best {
        Some(v) => CorrEstimate { value: v.min(1.0), fallback: false },
        None => CorrEstimate { value: 0.0, fallback: true },
    })
}

/// Largest canonical correlation, with a ridge of `1e-8 * trace` on each
/// covariance block. Falls back to [`corr_componentwise`] when a block is
/// singular or there are too few chains.
pub fn corr_cca(start: &[&[f64]], end: &[&[f64]]) -> Result<CorrEstimate> {
    let (n, d) = check(start, end)?;
    let fallback = || {
        corr_componentwise(start, end).map(|c| CorrEstimate { value: c.value, fallback: true })
    };
    if n <= d + 1 {
        return fallback();
    }
    let x = centered(start, d);
    let y = centered(end, d);
    let scale = 1.0 / (n as f64 - 1.0);
    let ridge = |mut c: DMatrix<f64>| {
        let t = c.trace();
        for j in 0..d {
            c[(j, j)] += 1e-8 * t;
        }
        (c, t)
    };
    let (cxx, tx) = ridge(x.tr_mul(&x) * scale);
    let (cyy, ty) = ridge(y.tr_mul(&y) * scale);
    if !(tx > 0.0 && ty > 0.0) {
        return fallback();
    }
    let cxy = x.tr_mul(&y) * scale;
    let (Some(lx), Some(ly)) = (cxx.cholesky(), cyy.cholesky()) else {
        return fallback();
    };
    let Some(a) = lx.l().solve_lower_triangular(&cxy) else {
        return fallback();
    };
    let Some(mt) = ly.l().solve_lower_triangular(&a.transpose()) else {
        return fallback();
    };
    let s = mt.singular_values().max();
    if !s.is_finite() {
        return fallback();
    }
    Ok(CorrEstimate { value: s.clamp(0.0, 1.0), fallback: false })
}

/// Pearson correlation of log-target values. Zero variance gives 0 with the
/// fallback flag set.
pub fn corr_log_target(start: &[f64], end: &[f64]) -> Result<CorrEstimate> {
    if start.len() != end.len() {
        return Err(Error::DimensionMismatch { expected: start.len(), got: end.len() });
    }
    if start.iter().chain(end).any(|v| !v.is_finite()) {
        return Err(Error::DegeneratePopulation("non-finite log target".into()));
    }
    Ok(match pearson(start, end) {
        Some(r) => CorrEstimate { value: r.clamp(-1.0, 1.0), fallback: false },
        None => CorrEstimate { value: 0.0, fallback: true },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn pairs(n: usize, d: usize, rho: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut rng = stream(11, 0, Purpose::Other, 0);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for _ in 0..n {
            let x: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let y: Vec<f64> = x
                .iter()
                .map(|v| rho * v + (1.0 - rho * rho).sqrt() * rng.sample::<f64, _>(StandardNormal))
                .collect();
            a.push(x);
            b.push(y);
        }
        (a, b)
    }

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|x| x.as_slice()).collect()
    }

    #[test]
    fn identical_points_are_fully_correlated() {
        let (a, _) = pairs(200, 3, 0.0);
        let c = corr_cca(&refs(&a), &refs(&a)).unwrap();
        assert!((c.value - 1.0).abs() < 1e-6);
        assert!(!c.fallback);
    }

    #[test]
    fn recovers_known_correlation() {
        let (a, b) = pairs(5000, 3, 0.5);
        let c = corr_cca(&refs(&a), &refs(&b)).unwrap();
        assert!((c.value - 0.5).abs() < 0.05, "{}", c.value);
        let c = corr_componentwise(&refs(&a), &refs(&b)).unwrap();
        assert!((c.value - 0.5).abs() < 0.05, "{}", c.value);
    }

    #[test]
    fn independent_points_are_near_zero() {
        let (a, b) = pairs(5000, 3, 0.0);
        assert!(corr_cca(&refs(&a), &refs(&b)).unwrap().value < 0.08);
    }

    #[test]
    fn singular_covariance_falls_back() {
        let a: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let c = corr_cca(&refs(&a), &refs(&a)).unwrap();
        assert!(c.value > 0.99);
        let flat: Vec<Vec<f64>> = (0..50).map(|_| vec![1.0, 1.0]).collect();
        let c = corr_cca(&refs(&flat), &refs(&flat)).unwrap();
        assert!(c.fallback);
    }

    #[test]
    fn log_target_zero_variance() {
        let c = corr_log_target(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.value, 0.0);
        assert!(c.fallback);
        let c = corr_log_target(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.5]).unwrap();
        assert!(c.value > 0.99);
    }
}
