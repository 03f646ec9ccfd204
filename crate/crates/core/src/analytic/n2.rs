//! Exact analysis of the `(n, 2)` batch mix.
//!
//! At most one queue is non-empty at any time, so the state is the length of
//! that queue. From state 0 any arrival (rate `n λ`) moves the chain to 1; from
//! `l >= 1` an arrival to the busy queue (rate `λ`) moves it up and an arrival
//! to any of the other `n - 1` queues (rate `(n - 1) λ`) releases a batch.
//!
//! Note on the load: the per-queue busy fraction is `(1 - p0) / n`, which for
//! the stationary law below equals `1 / (2 (n - 1))`. The expression
//! `1 / (2 (n - 2))` is the mean queue length `E[L]`, not the load.

use crate::error::{check_time, Error, Result};

use super::BatchMixParams;

/// Stationary law of the `(n, 2)` chain: `p_l = c * tail_base^(l + 1)` for
/// `l >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N2Stationary {
    pub p0: f64,
    pub tail_base: f64,
    pub c: f64,
}

impl N2Stationary {
    /// Stationary probability of state `l`.
    pub fn prob(&self, l: usize) -> f64 {
        if l == 0 {
            self.p0
        } else {
            self.c * self.tail_base.powi(l as i32 + 1)
        }
    }

    /// `sum_{l > last} p_l`.
    pub fn tail_mass_after(&self, last: usize) -> f64 {
        let x = self.tail_base;
        self.c * x.powi(last as i32 + 2) / (1.0 - x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct N2Moments {
    /// Time-average length of an arbitrary queue.
    pub mean_len: f64,
    pub second_len: f64,
    /// Fraction of time an arbitrary queue is non-empty.
    pub load: f64,
}

fn check_n2(params: &BatchMixParams) -> Result<()> {
    if params.k != 2 {
        return Err(Error::InvalidParams(format!(
            "exact analysis requires k = 2, got k = {}",
            params.k
        )));
    }
    if params.n <= 2 {
        return Err(Error::InvalidParams(
            "the (2, 2) mix is an assembly queue and has no stationary law".into(),
        ));
    }
    Ok(())
}

pub fn n2_stationary(params: &BatchMixParams) -> Result<N2Stationary> {
    check_n2(params)?;
    let n = params.n as f64;
    Ok(N2Stationary {
        p0: (n - 2.0) / (2.0 * (n - 1.0)),
        tail_base: 1.0 / (n - 1.0),
        c: n * (n - 2.0) / 2.0,
    })
}

pub fn n2_moments(params: &BatchMixParams) -> Result<N2Moments> {
    let st = n2_stationary(params)?;
    let n = params.n as f64;
    Ok(N2Moments {
        mean_len: 1.0 / (2.0 * (n - 2.0)),
        second_len: n / (2.0 * (n - 2.0).powi(2)),
        load: (1.0 - st.p0) / n,
    })
}

/// Mean message delay, `E[L] / λ` by Little's law; equals the integral of
/// [`n2_delay_ccdf`].
pub fn n2_mean_delay(params: &BatchMixParams) -> Result<f64> {
    let m = n2_moments(params)?;
    Ok(m.mean_len / params.rate)
}

const TAIL_CUTOFF: f64 = 1e-12;

/// `Pr{D > w}` for the delay `D` of an arbitrary message.
///
/// Mixes `Exp((n-1)λ)` (message finds the mix empty) with
/// `Erlang(l + 1, (n-1)λ)` (message joins the busy queue of length `l`). The
/// series is cut once the remaining stationary mass falls below `1e-12`.
pub fn n2_delay_ccdf(params: &BatchMixParams, w: f64) -> Result<f64> {
    check_time(w)?;
    let st = n2_stationary(params)?;
    let n = params.n as f64;
    let mu_w = (n - 1.0) * params.rate * w;

    // Running Poisson(mu_w) cdf: Pr{Erlang(l+1, mu) > w} = Pr{Poisson(mu w) <= l}.
    let ln_mu_w = mu_w.ln();
    let mut ln_term = -mu_w;
    let mut erlang_ccdf = ln_term.exp();

    let mut total = st.p0 * erlang_ccdf;
    let mut l = 1usize;
    loop {
        if mu_w > 0.0 {
            ln_term += ln_mu_w - (l as f64).ln();
            erlang_ccdf += ln_term.exp();
        }
        total += st.prob(l) * erlang_ccdf.min(1.0) / n;
        if st.tail_mass_after(l) / n < TAIL_CUTOFF {
            break;
        }
        l += 1;
    }
    Ok(total.clamp(0.0, 1.0))
}
