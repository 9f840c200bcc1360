use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// One-dimensional prior marginal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Gaussian { mean: f64, sd: f64 },
    /// Parameterised by its mean, not its rate.
    Exponential { mean: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl Marginal {
    pub fn gaussian(mean: f64, sd: f64) -> Result<Self> {
        let m = Marginal::Gaussian { mean, sd };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential(mean: f64) -> Result<Self> {
        let m = Marginal::Exponential { mean };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        let m = Marginal::Uniform { lo, hi };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Marginal::Gaussian { mean, sd } => mean.is_finite() && sd.is_finite() && sd > 0.0,
            Marginal::Exponential { mean } => mean.is_finite() && mean > 0.0,
            Marginal::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && hi > lo,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMarginal(format!("{self:?}")))
        }
    }

    /// Log density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match *self {
            Marginal::Gaussian { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - LN_SQRT_2PI
            }
            Marginal::Exponential { mean } => {
                if x >= 0.0 {
                    -mean.ln() - x / mean
                } else {
                    f64::NEG_INFINITY
                }
            }
            Marginal::Uniform { lo, hi } => {
                if (lo..=hi).contains(&x) {
                    -(hi - lo).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Marginal::Gaussian { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            Marginal::Exponential { mean } => {
                // rate is positive and finite after validation
                mean * Exp::new(1.0).expect("unit rate").sample(rng)
            }
            Marginal::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Marginal::Gaussian { mean, .. } => mean,
            Marginal::Exponential { mean } => mean,
            Marginal::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Marginal::Gaussian { sd, .. } => sd * sd,
            Marginal::Exponential { mean } => mean * mean,
            Marginal::Uniform { lo, hi } => (hi - lo).powi(2) / 12.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use statrs::distribution::{Continuous, Exp as SExp, Normal, Uniform};

    #[test]
    fn log_densities_match_statrs() {
        let g = Marginal::gaussian(0.75, 0.15).unwrap();
        let n = Normal::new(0.75, 0.15).unwrap();
        for x in [-1.0, 0.2, 0.75, 1.3] {
            assert!((g.ln_pdf(x) - n.ln_pdf(x)).abs() < 1e-12);
        }
        let e = Marginal::exponential(0.002).unwrap();
        let se = SExp::new(500.0).unwrap();
        for x in [0.0, 0.001, 0.01] {
            assert!((e.ln_pdf(x) - se.ln_pdf(x)).abs() < 1e-9);
        }
        assert_eq!(e.ln_pdf(-1e-12), f64::NEG_INFINITY);
        let u = Marginal::uniform(0.0, 1.0).unwrap();
        let su = Uniform::new(0.0, 1.0).unwrap();
        assert!((u.ln_pdf(0.3) - su.ln_pdf(0.3)).abs() < 1e-12);
        assert_eq!(u.ln_pdf(1.0 + 1e-12), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(Marginal::gaussian(0.0, 0.0).is_err());
        assert!(Marginal::exponential(-1.0).is_err());
        assert!(Marginal::uniform(1.0, 1.0).is_err());
        assert!(Marginal::gaussian(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn sample_moments() {
        let mut rng = stream(1, 0, Purpose::Other, 0);
        for m in [
            Marginal::gaussian(0.75, 0.15).unwrap(),
            Marginal::exponential(0.002).unwrap(),
            Marginal::uniform(-2.0, 3.0).unwrap(),
        ] {
            let n = 200_000;
            let xs: Vec<f64> = (0..n).map(|_| m.sample(&mut rng)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
            let se = (m.variance() / n as f64).sqrt();
            assert!((mean - m.mean()).abs() < 5.0 * se, "{m:?}");
            assert!((var / m.variance() - 1.0).abs() < 0.02, "{m:?}");
            assert!(xs.iter().all(|&x| m.ln_pdf(x).is_finite()));
        }
    }
}
