//! Sampling mix: each queue's length is a birth-death chain with birth rate
//! `λ (1 - p_a)` and death rate `λ (k - p_a)`, so the load is their ratio and
//! the mean delay follows from Little's law.

use crate::error::{Error, Result};

use super::SamplingMixParams;

fn check_k(params: &SamplingMixParams) -> Result<()> {
    if params.k < 2 {
        return Err(Error::InvalidParams(format!(
            "sampling mix analysis needs k >= 2, got k = {}",
            params.k
        )));
    }
    if params.k > params.n - 1 {
        return Err(Error::InvalidParams(format!(
            "sampling mix analysis needs k <= n - 1, got n = {}, k = {}",
            params.n, params.k
        )));
    }
    Ok(())
}

/// Fraction of time an arbitrary queue is non-empty: `(1 - p_a) / (k - p_a)`.
pub fn sampling_load(params: &SamplingMixParams) -> Result<f64> {
    check_k(params)?;
    Ok((1.0 - params.p_a) / (params.k as f64 - params.p_a))
}

/// Mean message delay: `(1 - p_a) / (λ (k - 1))`.
pub fn sampling_mean_delay(params: &SamplingMixParams) -> Result<f64> {
    check_k(params)?;
    Ok((1.0 - params.p_a) / (params.rate * (params.k as f64 - 1.0)))
}

/// Steady-state probability `q = (1 - p_a) / (n - 1)` that a given queue
/// other than the arrival's emits a message at the arrival instant.
pub fn departure_probability_other(params: &SamplingMixParams) -> f64 {
    (1.0 - params.p_a) / (params.n as f64 - 1.0)
}
