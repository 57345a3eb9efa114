//! Exponential lifetime models. Time is in hours throughout.

use thiserror::Error;

use crate::ugf::{Term, UFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LifetimeError {
    #[error("mission time {0} h is negative")]
    NegativeTime(f64),
    #[error("failure rate {0} per hour must be positive and finite")]
    InvalidRate(f64),
    #[error("working performance {0} must be non-negative and finite")]
    InvalidPerformance(f64),
}

/// Component with constant failure rate `λ`: `F(t) = 1 - e^{-λt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialLifetime {
    rate: f64,
    working_performance: f64,
}

impl ExponentialLifetime {
    /// `rate` in failures per hour, working performance 1.
    pub fn new(rate: f64) -> Result<Self, LifetimeError> {
        Self::with_performance(rate, 1.0)
    }

    pub fn with_performance(rate: f64, working_performance: f64) -> Result<Self, LifetimeError> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(LifetimeError::InvalidRate(rate));
        }
        if !(working_performance >= 0.0 && working_performance.is_finite()) {
            return Err(LifetimeError::InvalidPerformance(working_performance));
        }
        Ok(Self {
            rate,
            working_performance,
        })
    }

    /// Rate given in units of 1e-6 per hour, as tabulated failure data
    /// usually is.
    pub fn from_rate_e6(rate_e6: f64, working_performance: f64) -> Result<Self, LifetimeError> {
        Self::with_performance(rate_e6 * 1e-6, working_performance)
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn working_performance(&self) -> f64 {
        self.working_performance
    }

    /// `F(t)`.
    pub fn failure_probability(&self, t: f64) -> Result<f64, LifetimeError> {
        check_time(t)?;
        Ok(-(-self.rate * t).exp_m1())
    }

    /// `R(t) = e^{-λt}`.
    pub fn reliability(&self, t: f64) -> Result<f64, LifetimeError> {
        check_time(t)?;
        Ok((-self.rate * t).exp())
    }

    /// Two-state u-function `F(t)·z^0 + R(t)·z^{g}`.
    pub fn binary_ufunction_at(&self, t: f64) -> Result<UFunction, LifetimeError> {
        let failure = self.failure_probability(t)?;
        let reliability = self.reliability(t)?;
        Ok(UFunction::canonical(vec![
            Term {
                performance: 0.0,
                probability: failure,
            },
            Term {
                performance: self.working_performance,
                probability: reliability,
            },
        ]))
    }
}

fn check_time(t: f64) -> Result<(), LifetimeError> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(LifetimeError::NegativeTime(t))
    }
}

pub fn failure_probability(model: &ExponentialLifetime, t: f64) -> Result<f64, LifetimeError> {
    model.failure_probability(t)
}

pub fn binary_ufunction_at(
    model: &ExponentialLifetime,
    t: f64,
) -> Result<UFunction, LifetimeError> {
    model.binary_ufunction_at(t)
}
