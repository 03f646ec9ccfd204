//! Closed-form and fixed-point delay analysis.
//!
//! - [`n2`]: exact stationary analysis of the `(n, 2)` batch mix, whose state
//!   is a one-dimensional birth-death process.
//! - [`efs`]: decoupling approximation for `(n, k > 2)`, where each queue is
//!   treated as an M/G/1 queue with exceptional first service and the load is
//!   found by a fixed point.
//! - [`sampling`]: load and delay of the sampling mix.

pub mod efs;
pub mod n2;
pub mod sampling;

pub use efs::{
    efs_fixed_point, efs_fixed_point_with, efs_load, efs_mean_wait, hol_state_dist,
    BatchFormation, EfsApproxResult, FixedPointMethod, HoLStateDist,
};
pub use n2::{n2_delay_ccdf, n2_mean_delay, n2_moments, n2_stationary, N2Moments, N2Stationary};
pub use sampling::{departure_probability_other, sampling_load, sampling_mean_delay};

use crate::error::{check_probability, check_rate, Error, Result};

/// Parameters of an `(n, k)` batch mix with per-sender Poisson rate `rate`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchMixParams {
    pub n: usize,
    pub k: usize,
    pub rate: f64,
}

impl BatchMixParams {
    pub fn new(n: usize, k: usize, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        if n < 2 || k < 2 || k > n {
            return Err(Error::InvalidParams(format!(
                "batch mix needs 2 <= k <= n and n >= 2, got n={n}, k={k}"
            )));
        }
        Ok(Self { n, k, rate })
    }
}

/// Parameters of an `(n, k)` sampling mix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingMixParams {
    pub n: usize,
    pub k: usize,
    pub rate: f64,
    /// Probability that the queue receiving the arrival is among the released.
    pub p_a: f64,
}

impl SamplingMixParams {
    pub fn new(n: usize, k: usize, rate: f64, p_a: f64) -> Result<Self> {
        check_rate(rate)?;
        check_probability(p_a)?;
        if n < 2 || k < 1 || k > n {
            return Err(Error::InvalidParams(format!(
                "sampling mix needs 1 <= k <= n and n >= 2, got n={n}, k={k}"
            )));
        }
        // The skip branch draws k queues from the other n - 1.
        if p_a < 1.0 && k > n - 1 {
            return Err(Error::InvalidParams(format!(
                "sampling mix with p_a < 1 needs k <= n - 1, got n={n}, k={k}"
            )));
        }
        Ok(Self { n, k, rate, p_a })
    }
}
