use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIGMA_MIN: f64 = 1e-6;
pub const SIGMA_MAX: f64 = 10.0;

/// Multiplicative proposal-scale controller
/// `sigma <- sigma * exp(gain * (rate - target_rate))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Controller {
    pub sigma: f64,
    pub target_rate: f64,
    pub gain: f64,
}

impl Controller {
    pub fn new(sigma: f64, target_rate: f64, gain: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidConfig(format!("initial scale {sigma} must be positive")));
        }
        if !(0.0..=1.0).contains(&target_rate) || target_rate == 0.0 {
            return Err(Error::InvalidConfig(format!("target rate {target_rate} outside (0, 1]")));
        }
        if !(gain.is_finite() && gain > 0.0) {
            return Err(Error::InvalidConfig(format!("gain {gain} must be positive")));
        }
        Ok(Self { sigma: sigma.clamp(SIGMA_MIN, SIGMA_MAX), target_rate, gain })
    }

    /// Controller after observing acceptance rate `rate`.
    pub fn update(self, rate: f64) -> Self {
        let rate = if rate.is_finite() { rate.clamp(0.0, 1.0) } else { 0.0 };
        let sigma = (self.sigma * (self.gain * (rate - self.target_rate)).exp())
            .clamp(SIGMA_MIN, SIGMA_MAX);
        Self { sigma, ..self }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn on_target_rate_is_a_fixed_point() {
        let c = Controller::new(0.3, 0.234, 2.1).unwrap();
        assert_eq!(c.update(0.234).sigma, 0.3);
        assert!(c.update(0.5).sigma > 0.3);
        assert!(c.update(0.0).sigma < 0.3);
    }

    #[test]
    fn clamps_scale() {
        let mut c = Controller::new(9.0, 0.234, 2.1).unwrap();
        for _ in 0..10 {
            c = c.update(1.0);
        }
        assert_eq!(c.sigma, SIGMA_MAX);
        for _ in 0..100 {
            c = c.update(0.0);
        }
        assert_eq!(c.sigma, SIGMA_MIN);
    }

    proptest! {
        #[test]
        fn log_step_bounded_by_gain(s in 1e-5f64..5.0, rate in 0.0f64..1.0) {
            let c = Controller::new(s, 0.234, 2.1).unwrap();
            let n = c.update(rate);
            prop_assert!((n.sigma.ln() - c.sigma.ln()).abs() <= 2.1 + 1e-12);
            prop_assert!((SIGMA_MIN..=SIGMA_MAX).contains(&n.sigma));
        }
    }
}
