//! Independent oracles shared by the integration tests. None of these call
//! into the closed forms they are used to check.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mixq::adversary::IntersectionAttack;
use mixq::sim::{ObservationRecord, TraceSink};
use mixq::ReceiverId;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Binomial, Distribution, Exp1};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF};

/// Stationary law of a birth-death chain truncated to `states` states, found
/// by a dense linear solve of `pi Q = 0, sum pi = 1`.
pub fn truncated_birth_death(
    up: impl Fn(usize) -> f64,
    down: impl Fn(usize) -> f64,
    states: usize,
) -> Vec<f64> {
    // Build Q^T so that Q^T pi = 0.
    let mut qt = DMatrix::<f64>::zeros(states, states);
    for i in 0..states {
        if i + 1 < states {
            let u = up(i);
            qt[(i + 1, i)] += u;
            qt[(i, i)] -= u;
        }
        if i > 0 {
            let d = down(i);
            qt[(i - 1, i)] += d;
            qt[(i, i)] -= d;
        }
    }
    for j in 0..states {
        qt[(states - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(states);
    rhs[states - 1] = 1.0;
    let pi = qt.lu().solve(&rhs).expect("generator of an irreducible chain");
    pi.iter().copied().collect()
}

/// One draw of the `k`-th smallest of `n` iid `Exp(rate)`, by sorting.
pub fn mc_order_stat<R: Rng + ?Sized>(n: usize, k: usize, rate: f64, rng: &mut R) -> f64 {
    if k == 0 || n < k {
        return 0.0;
    }
    let mut xs: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect::<Vec<f64>>();
    let (_, kth, _) = xs.select_nth_unstable_by(k - 1, f64::total_cmp);
    *kth / rate
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// `cdf`, for laws on `[0, inf)` whose only possible atom is at zero.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < samples.len() {
        let x = samples[i];
        let mut j = i;
        while j < samples.len() && samples[j] == x {
            j += 1;
        }
        let f = cdf(x);
        let left = if x > 0.0 { f } else { 0.0 };
        d = d.max((f - j as f64 / n).abs()).max((left - i as f64 / n).abs());
        i = j;
    }
    d
}

/// Composite Simpson rule on `[a, b]`.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let panels = panels + panels % 2;
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `R ~ Binom(n-1, p) | R <= k-1` by rejection.
pub fn mc_hol_state<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> usize {
    let b = Binomial::new((n - 1) as u64, p).unwrap();
    loop {
        let r = b.sample(rng) as usize;
        if r < k {
            return r;
        }
    }
}

/// One draw of the regular batch-formation delay.
pub fn mc_v<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rate: f64, rng: &mut R) -> f64 {
    let r = mc_hol_state(n, k, p, rng);
    mc_order_stat(n - 1 - r, k - 1 - r, rate, rng)
}

/// One draw of the exceptional batch-formation delay: the arrival is the
/// `j`-th of the `k - r` still needed, `j` uniform.
pub fn mc_ve<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rate: f64, rng: &mut R) -> f64 {
    let r = mc_hol_state(n, k, p, rng);
    let j = rng.random_range(1..=k - r);
    mc_order_stat(n - r - j, k - r - j, rate, rng)
}

/// Pearson chi-square p-value for `counts` against equal cell probabilities.
pub fn chi_square_uniform_p(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Pearson chi-square p-value for observed counts against probabilities.
pub fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Central interval `[lo, hi]` holding at least `conf` of `Binom(trials, p)`.
pub fn binomial_band(trials: u64, p: f64, conf: f64) -> (u64, u64) {
    let d = statrs::distribution::Binomial::new(p, trials).unwrap();
    let tail = (1.0 - conf) / 2.0;
    let lo = (0..=trials).find(|&x| d.cdf(x) > tail).unwrap();
    let hi = (0..=trials).find(|&x| d.cdf(x) >= 1.0 - tail).unwrap();
    debug_assert!(d.pmf(lo) > 0.0);
    (lo, hi)
}

pub fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Feeds an intersection attack and checks after every record that each
/// candidate set still holds exactly one true receiver, distinct across sets.
pub struct SoundnessCheck<'a> {
    pub attack: IntersectionAttack,
    pub truth: &'a BTreeSet<ReceiverId>,
    pub checks: u64,
    pub violations: u64,
}

impl<'a> SoundnessCheck<'a> {
    pub fn new(attack: IntersectionAttack, truth: &'a BTreeSet<ReceiverId>) -> Self {
        Self { attack, truth, checks: 0, violations: 0 }
    }
}

impl TraceSink for SoundnessCheck<'_> {
    fn observe(&mut self, record: &ObservationRecord) {
        if self.attack.is_done() {
            return;
        }
        self.attack.observe(record);
        // Candidates only change on departures.
        if !matches!(record, ObservationRecord::Departure { .. }) {
            return;
        }
        self.checks += 1;
        let mut hit = BTreeSet::new();
        for c in self.attack.candidates() {
            let inside: Vec<_> = c.intersection(self.truth).collect();
            if inside.len() != 1 || !hit.insert(*inside[0]) {
                self.violations += 1;
            }
        }
    }
}
