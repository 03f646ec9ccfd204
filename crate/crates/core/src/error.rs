use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("time argument must be non-negative, got {0}")]
    NegativeTime(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("invalid mix parameters: {0}")]
    InvalidParams(String),
    #[error("fixed point did not converge within {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("approximation is unstable: no load in [0, 1) satisfies the fixed-point relation")]
    Unstable,
    #[error("malformed trace at record {index}: {reason}")]
    MalformedTrace { index: usize, reason: String },
    #[error("attack precondition not met: {0}")]
    AttackRefused(String),
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidRate(rate))
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

pub(crate) fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(Error::NegativeTime(t))
    }
}
