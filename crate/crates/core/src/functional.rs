//! Test functions `g` supported in `[1, inf)` for functional tail limits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    Zero,
    /// 0 below `lo`, linear up to 1 at `hi`, then 1.
    Ramp { lo: f64, hi: f64 },
    /// C^1 step `3t^2 - 2t^3` in `t = (r - start) / width`.
    SmoothStep { start: f64, width: f64 },
    /// `1{r > threshold}`.
    Indicator { threshold: f64 },
}

impl TestFunction {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TestFunction::Zero => true,
            TestFunction::Ramp { lo, hi } => lo >= 1.0 && hi > lo,
            TestFunction::SmoothStep { start, width } => start >= 1.0 && width > 0.0,
            TestFunction::Indicator { threshold } => threshold >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("test function {self:?} is not supported in [1, inf)")))
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            TestFunction::Zero => 0.0,
            TestFunction::Ramp { lo, hi } => ((r - lo) / (hi - lo)).clamp(0.0, 1.0),
            TestFunction::SmoothStep { start, width } => {
                let t = ((r - start) / width).clamp(0.0, 1.0);
                t * t * (3.0 - 2.0 * t)
            }
            TestFunction::Indicator { threshold } => {
                if r > threshold {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Interval carrying the derivative, if `g` is absolutely continuous.
    fn rising_part(&self) -> Option<(f64, f64)> {
        match *self {
            TestFunction::Ramp { lo, hi } => Some((lo, hi)),
            TestFunction::SmoothStep { start, width } => Some((start, start + width)),
            _ => None,
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            TestFunction::Ramp { lo, hi } if r > lo && r < hi => 1.0 / (hi - lo),
            TestFunction::SmoothStep { start, width } if r > start && r < start + width => {
                let t = (r - start) / width;
                6.0 * t * (1.0 - t) / width
            }
            _ => 0.0,
        }
    }

    /// `a int g(r) r^(-a-1) dr`.
    pub fn weighted_integral(&self, alpha: f64) -> Result<f64> {
        match *self {
            TestFunction::Zero => Ok(0.0),
            TestFunction::Indicator { threshold } => Ok(threshold.powf(-alpha)),
            _ => {
                let (a, b) = self.rising_part().unwrap_or((1.0, 1.0));
                // Integration by parts: a int g r^(-a-1) dr = int g'(r) r^-a dr.
                let f = |r: f64| self.derivative(r) * r.powf(-alpha);
                Ok(quad::integrate(f, a, b, Tolerance::default())?.value)
            }
        }
    }

    /// `E g(y B)` for `y > 0`, given the survival function of `B`.
    pub fn expect_scaled<S: Fn(f64) -> f64>(&self, y: f64, survival: S) -> Result<f64> {
        match *self {
            TestFunction::Zero => Ok(0.0),
            TestFunction::Indicator { threshold } => Ok(survival(threshold / y)),
            _ => {
                let (a, b) = self.rising_part().unwrap_or((1.0, 1.0));
                let f = |r: f64| self.derivative(r) * survival(r / y);
                Ok(quad::integrate(f, a, b, Tolerance { abs: 1e-13, rel: 1e-9 })?.value)
            }
        }
    }
}

/// Smooth pair with `g2 <= 1{r > xi} <= g1`, differing on `[xi - eta, xi + eta]`.
pub fn sandwich(xi: f64, eta: f64) -> Result<(TestFunction, TestFunction)> {
    if !(eta > 0.0 && xi - eta > 1.0) {
        return Err(Error::invalid(format!(
            "sandwich needs eta > 0 and xi - eta > 1, got xi = {xi}, eta = {eta}"
        )));
    }
    Ok((
        TestFunction::SmoothStep {
            start: xi - eta,
            width: eta,
        },
        TestFunction::SmoothStep { start: xi, width: eta },
    ))
}
