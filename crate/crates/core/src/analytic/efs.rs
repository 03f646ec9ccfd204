//! Decoupling approximation for the `(n, k)` batch mix with `k > 2`.
//!
//! A message that reaches the head of its queue is assumed to see each other
//! queue non-empty independently with probability `p`. Given at most `k - 1`
//! non-empty queues, the number it sees is `R ~ Binom(n-1, p) | {B <= k-1}`
//! and its batch-formation delay is `X_{n-1-R : k-1-R}`. A message that
//! arrives to an empty queue is one of the `k - R` arrivals needed to form the
//! next batch, uniformly placed among them.
//!
//! Each queue then behaves as an M/G/1 queue whose first customer in a busy
//! period gets the exceptional service `V_e` and the rest get `V`. The load
//! `p = ρ` is closed by a fixed point of the busy-fraction relation of that
//! queue.

use crate::error::{check_probability, check_rate, check_time, Error, Result};
use crate::order_stats::{ln_choose, log_sum_exp, ExpOrderStat};

use super::BatchMixParams;

/// Distribution of the number of other non-empty queues seen at HoL.
#[derive(Debug, Clone, PartialEq)]
pub struct HoLStateDist {
    probs: Vec<f64>,
}

impl HoLStateDist {
    /// Probabilities indexed by `r` in `0..k`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mass(&self, r: usize) -> f64 {
        self.probs.get(r).copied().unwrap_or(0.0)
    }

    fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.probs.iter().copied().enumerate().filter(|&(_, w)| w > 0.0)
    }
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(Error::InvalidParams(format!("need 2 <= k <= n, got n={n}, k={k}")));
    }
    Ok(())
}

/// `Binom(n - 1, p)` conditioned on `{B <= k - 1}`.
pub fn hol_state_dist(n: usize, k: usize, p: f64) -> Result<HoLStateDist> {
    check_nk(n, k)?;
    check_probability(p)?;
    let mut probs = vec![0.0; k];
    if p == 0.0 {
        probs[0] = 1.0;
    } else if p == 1.0 {
        // Limit p -> 1: all mass on the largest admissible count.
        probs[k - 1] = 1.0;
    } else {
        let others = n - 1;
        let (ln_p, ln_q) = (p.ln(), (-p).ln_1p());
        let ln_w: Vec<f64> = (0..k)
            .map(|r| ln_choose(others, r) + r as f64 * ln_p + (others - r) as f64 * ln_q)
            .collect();
        let ln_norm = log_sum_exp(&ln_w);
        for (slot, lw) in probs.iter_mut().zip(&ln_w) {
            *slot = (lw - ln_norm).exp();
        }
    }
    Ok(HoLStateDist { probs })
}

/// Regular (`V`) and exceptional first (`V_e`) batch-formation delays for a
/// given HoL occupancy probability `p`.
#[derive(Debug, Clone)]
pub struct BatchFormation {
    n: usize,
    k: usize,
    rate: f64,
    hol: HoLStateDist,
}

impl BatchFormation {
    pub fn new(n: usize, k: usize, p: f64, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        let hol = hol_state_dist(n, k, p)?;
        Ok(Self { n, k, rate, hol })
    }

    pub fn hol(&self) -> &HoLStateDist {
        &self.hol
    }

    fn regular_stat(&self, r: usize) -> ExpOrderStat {
        ExpOrderStat::new(self.n - 1 - r, self.k - 1 - r, self.rate).expect("rate checked")
    }

    /// Order statistics making up `V_e | R = r`, each with weight `1 / (k - r)`.
    fn exceptional_stats(&self, r: usize) -> impl Iterator<Item = ExpOrderStat> + '_ {
        let free = self.k - r;
        (1..=free).map(move |j| {
            ExpOrderStat::new(self.n - r - j, free - j, self.rate).expect("rate checked")
        })
    }

    pub fn v_cdf(&self, v: f64) -> Result<f64> {
        check_time(v)?;
        Ok(self
            .hol
            .iter()
            .map(|(r, w)| w * self.regular_stat(r).cdf_unchecked(v))
            .sum())
    }

    /// `(E[V], E[V^2])`.
    pub fn v_moments(&self) -> (f64, f64) {
        self.hol.iter().fold((0.0, 0.0), |(m1, m2), (r, w)| {
            let s = self.regular_stat(r);
            (m1 + w * s.mean(), m2 + w * s.second_moment())
        })
    }

    pub fn ve_cdf(&self, v: f64) -> Result<f64> {
        check_time(v)?;
        Ok(self
            .hol
            .iter()
            .map(|(r, w)| {
                let free = (self.k - r) as f64;
                let inner: f64 = self.exceptional_stats(r).map(|s| s.cdf_unchecked(v)).sum();
                w * inner / free
            })
            .sum())
    }

    /// `(E[V_e], E[V_e^2])`.
    pub fn ve_moments(&self) -> (f64, f64) {
        self.hol.iter().fold((0.0, 0.0), |(m1, m2), (r, w)| {
            let free = (self.k - r) as f64;
            let (a, b) = self
                .exceptional_stats(r)
                .fold((0.0, 0.0), |(a, b), s| (a + s.mean(), b + s.second_moment()));
            (m1 + w * a / free, m2 + w * b / free)
        })
    }
}

/// Busy fraction of an M/G/1 queue with exceptional first service.
///
/// Returns `+inf` when the regular service alone saturates the queue.
pub fn efs_load(rate: f64, mean_v: f64, mean_ve: f64) -> f64 {
    let denom = 1.0 - rate * (mean_v - mean_ve);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        rate * mean_ve / denom
    }
}

/// Mean wait before service in an M/G/1 queue with exceptional first
/// service (regular moments `v`, exceptional moments `ve`).
pub fn efs_mean_wait(rate: f64, (mean_v, second_v): (f64, f64), (mean_ve, second_ve): (f64, f64)) -> f64 {
    let slack = 1.0 - rate * mean_v;
    if slack <= 0.0 {
        return f64::INFINITY;
    }
    rate * second_v / (2.0 * slack)
        + rate * (second_ve - second_v) / (2.0 * (slack + rate * mean_ve))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointMethod {
    /// Bisection on `ρ - g(ρ)` over `[0, 1 - 1e-6]`.
    Bisection,
    /// `ρ <- (1 - α) ρ + α g(ρ)` from `ρ = 0` with `α = 1/2`.
    Damped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfsApproxResult {
    pub rho: f64,
    pub mean_v: f64,
    pub second_v: f64,
    pub mean_ve: f64,
    pub second_ve: f64,
    /// Mean time in queue before reaching HoL.
    pub mean_wait: f64,
    /// Mean sojourn: wait plus own batch-formation delay.
    pub mean_delay: f64,
    pub iterations: usize,
}

const RESIDUAL_TOL: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;
const MAX_DAMPED: usize = 100_000;
const UPPER_LOAD: f64 = 1.0 - 1e-6;

fn load_map(params: &BatchMixParams, rho: f64) -> f64 {
    let bf = BatchFormation::new(params.n, params.k, rho, params.rate).expect("validated");
    efs_load(params.rate, bf.v_moments().0, bf.ve_moments().0)
}

pub fn efs_fixed_point(params: &BatchMixParams) -> Result<EfsApproxResult> {
    efs_fixed_point_with(params, FixedPointMethod::Bisection)
}

pub fn efs_fixed_point_with(
    params: &BatchMixParams,
    method: FixedPointMethod,
) -> Result<EfsApproxResult> {
    if params.k >= params.n {
        return Err(Error::InvalidParams(format!(
            "k = n = {} is an unstable assembly queue",
            params.n
        )));
    }
    let residual = |rho: f64| rho - load_map(params, rho);

    let (rho, iterations) = match method {
        FixedPointMethod::Bisection => {
            let (mut lo, mut hi) = (0.0, UPPER_LOAD);
            if residual(lo) >= 0.0 {
                (lo, 0)
            } else if residual(hi) < 0.0 {
                return Err(Error::Unstable);
            } else {
                let mut it = 0;
                while it < MAX_BISECTIONS {
                    it += 1;
                    let mid = 0.5 * (lo + hi);
                    if residual(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= f64::EPSILON * hi.max(1e-300) {
                        break;
                    }
                }
                (0.5 * (lo + hi), it)
            }
        }
        FixedPointMethod::Damped => {
            let mut rho = 0.0;
            let mut it = 0;
            loop {
                let g = load_map(params, rho);
                if rho >= UPPER_LOAD && !(g < 1.0) {
                    return Err(Error::Unstable);
                }
                let g = g.min(1.0);
                if (rho - g).abs() < 1e-13 || it >= MAX_DAMPED {
                    break;
                }
                rho = (0.5 * rho + 0.5 * g).min(UPPER_LOAD);
                it += 1;
            }
            (rho, it)
        }
    };

    let res = residual(rho).abs();
    if !(res < RESIDUAL_TOL) {
        return Err(Error::NonConvergence { iterations, residual: res });
    }

    let bf = BatchFormation::new(params.n, params.k, rho, params.rate)?;
    let (mean_v, second_v) = bf.v_moments();
    let (mean_ve, second_ve) = bf.ve_moments();
    let mean_wait = efs_mean_wait(params.rate, (mean_v, second_v), (mean_ve, second_ve));
    // PASTA: a fraction 1 - ρ of messages find their queue empty.
    let mean_delay = mean_wait + (1.0 - rho) * mean_ve + rho * mean_v;
    Ok(EfsApproxResult {
        rho,
        mean_v,
        second_v,
        mean_ve,
        second_ve,
        mean_wait,
        mean_delay,
        iterations,
    })
}
