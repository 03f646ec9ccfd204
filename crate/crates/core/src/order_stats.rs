//! Order statistics of i.i.d. exponential random variables.
//!
//! `X_{n:k}` is the `k`-th smallest of `n` i.i.d. `Exp(rate)` variables.
//! When `k == 0` or `n < k` the statistic is a point mass at zero, which lets
//! the batch-formation expressions in [`crate::analytic`] be evaluated without
//! special-casing the "no more arrivals needed" branch.
//!
//! Moments use the spacings representation
//! `X_{n:k} = sum_{i=n-k+1}^{n} E_i / (i * rate)` with `E_i ~ Exp(1)`
//! independent, which is exact.

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{check_rate, check_time, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpOrderStat {
    n: usize,
    k: usize,
    rate: f64,
}

impl ExpOrderStat {
    pub fn new(n: usize, k: usize, rate: f64) -> Result<Self> {
        check_rate(rate)?;
        Ok(Self { n, k, rate })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// True when the statistic is identically zero.
    pub fn is_degenerate(&self) -> bool {
        self.k == 0 || self.n < self.k
    }

    /// `Pr{X_{n:k} <= v}`.
    pub fn cdf(&self, v: f64) -> Result<f64> {
        check_time(v)?;
        Ok(self.cdf_unchecked(v))
    }

    /// `Pr{X_{n:k} > v}`, computed directly so that small tails keep their
    /// relative precision.
    pub fn ccdf(&self, v: f64) -> Result<f64> {
        check_time(v)?;
        Ok(self.ccdf_unchecked(v))
    }

    pub(crate) fn cdf_unchecked(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            return 1.0;
        }
        if v <= 0.0 {
            return 0.0;
        }
        let (lower, upper) = self.binomial_tails(v);
        // Return whichever tail is computed without cancellation.
        if upper <= 0.5 {
            upper
        } else {
            (1.0 - lower).clamp(0.0, 1.0)
        }
    }

    pub(crate) fn ccdf_unchecked(&self, v: f64) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        if v <= 0.0 {
            return 1.0;
        }
        let (lower, upper) = self.binomial_tails(v);
        if lower <= 0.5 {
            lower
        } else {
            (1.0 - upper).clamp(0.0, 1.0)
        }
    }

    /// Returns `(Pr{B < k}, Pr{B >= k})` for `B ~ Binom(n, 1 - e^{-rate v})`,
    /// the number of the `n` exponentials that have fired by time `v`.
    fn binomial_tails(&self, v: f64) -> (f64, f64) {
        let x = self.rate * v;
        let ln_fired = (-(-x).exp_m1()).ln();
        let ln_waiting = -x;
        let n = self.n;
        let mut lower = Vec::with_capacity(self.k);
        let mut upper = Vec::with_capacity(n + 1 - self.k);
        let mut ln_c = 0.0;
        for j in 0..=n {
            let term = ln_c + j as f64 * ln_fired + (n - j) as f64 * ln_waiting;
            if j < self.k {
                lower.push(term);
            } else {
                upper.push(term);
            }
            if j < n {
                ln_c += ((n - j) as f64).ln() - ((j + 1) as f64).ln();
            }
        }
        (log_sum_exp(&lower).exp(), log_sum_exp(&upper).exp())
    }

    pub fn mean(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        self.spacing_range().map(|i| 1.0 / i as f64).sum::<f64>() / self.rate
    }

    pub fn variance(&self) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let s: f64 = self.spacing_range().map(|i| 1.0 / (i as f64).powi(2)).sum();
        s / (self.rate * self.rate)
    }

    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// Draws one value by summing the `k` independent spacings.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.is_degenerate() {
            return 0.0;
        }
        let mut total = 0.0;
        for i in self.spacing_range() {
            let e: f64 = Exp1.sample(rng);
            total += e / i as f64;
        }
        total / self.rate
    }

    fn spacing_range(&self) -> std::ops::RangeInclusive<usize> {
        (self.n - self.k + 1)..=self.n
    }
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln C(n, j)`.
pub(crate) fn ln_choose(n: usize, j: usize) -> f64 {
    debug_assert!(j <= n);
    let j = j.min(n - j);
    (0..j)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}
