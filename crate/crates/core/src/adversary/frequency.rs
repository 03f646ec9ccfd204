//! Frequency attack on the sampling mix, needing no state knowledge.
//!
//! At every target arrival the adversary counts the receivers in the batch
//! released at that instant. In steady state a receiver of the target shows
//! up with probability proportional to `p_a`, any other receiver with
//! probability proportional to `q = (1 - p_a) / (n - 1)`. The target's
//! receivers are therefore the `m` largest counters when `p_a > q`, the `m`
//! smallest when `p_a < q`, and indistinguishable when `p_a = q`, i.e. when
//! `p_a = 1 / n`.

use std::collections::{BTreeMap, BTreeSet};

use super::{AttackResult, AttackStatus};
use crate::sim::{ObservationRecord, TraceSink};
use crate::{ReceiverId, SenderId};

/// Two-sided 99% normal quantile.
const Z_99: f64 = 2.575_829_303_548_901;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecisionRule {
    /// Derive the direction from the mix parameters; refuses at `p_a = 1/n`.
    Auto { n: usize, p_a: f64 },
    Largest,
    Smallest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stopping {
    /// Decide after exactly this many target arrivals.
    Fixed(u64),
    /// Decide once the `m`-th and `(m+1)`-th counters differ by more than a
    /// 99% normal bound, after at least `min` and at most `max` target
    /// arrivals.
    Adaptive { min: u64, max: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Largest,
    Smallest,
}

#[derive(Debug, Clone)]
pub struct FrequencyAttack {
    target: SenderId,
    m: usize,
    direction: Option<Direction>,
    refusal: Option<String>,
    stopping: Stopping,
    counts: BTreeMap<ReceiverId, u64>,
    seen: BTreeSet<ReceiverId>,
    target_arrivals: u64,
    awaiting: Option<f64>,
    records: u64,
    decision: Option<AttackResult>,
}

impl FrequencyAttack {
    pub fn new(target: SenderId, m: usize, rule: DecisionRule, stopping: Stopping) -> Self {
        let (direction, refusal) = match rule {
            DecisionRule::Largest => (Some(Direction::Largest), None),
            DecisionRule::Smallest => (Some(Direction::Smallest), None),
            DecisionRule::Auto { n, p_a } => {
                let q = (1.0 - p_a) / (n as f64 - 1.0);
                if (p_a - q).abs() <= 1e-12 {
                    let msg = format!(
                        "p_a = {p_a} equals q = 1/n: departure frequencies carry no \
                         information about the target's receivers"
                    );
                    (None, Some(msg))
                } else if p_a > q {
                    (Some(Direction::Largest), None)
                } else {
                    (Some(Direction::Smallest), None)
                }
            }
        };
        Self {
            target,
            m: m.max(1),
            direction,
            refusal,
            stopping,
            counts: BTreeMap::new(),
            seen: BTreeSet::new(),
            target_arrivals: 0,
            awaiting: None,
            records: 0,
            decision: None,
        }
    }

    pub fn target_arrivals(&self) -> u64 {
        self.target_arrivals
    }

    /// Co-departure counters of every receiver seen so far, zero included.
    pub fn counts(&self) -> Vec<(ReceiverId, u64)> {
        self.seen
            .iter()
            .map(|r| (*r, self.counts.get(r).copied().unwrap_or(0)))
            .collect()
    }

    pub fn is_done(&self) -> bool {
        self.decision.is_some() || self.refusal.is_some()
    }

    /// Receivers ranked by the decision direction, ties by id.
    fn ranked(&self, direction: Direction) -> Vec<(ReceiverId, u64)> {
        let mut c = self.counts();
        match direction {
            Direction::Largest => c.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0))),
            Direction::Smallest => c.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0))),
        }
        c
    }

    fn separated(&self, ranked: &[(ReceiverId, u64)]) -> bool {
        if ranked.len() <= self.m {
            return false;
        }
        let (a, b) = (ranked[self.m - 1].1 as f64, ranked[self.m].1 as f64);
        let spread = (a + b).sqrt();
        spread > 0.0 && (a - b).abs() / spread > Z_99
    }

    fn decide(&mut self, time: f64, status: AttackStatus, diagnostic: Option<String>) {
        let direction = self.direction.expect("not refused");
        let ranked = self.ranked(direction);
        let mut identified: Vec<ReceiverId> = ranked.iter().take(self.m).map(|r| r.0).collect();
        identified.sort_unstable();
        self.decision = Some(AttackResult {
            status,
            identified,
            observations_used: self.records,
            ttd: (status == AttackStatus::Success).then_some(time),
            diagnostic,
        });
    }

    /// Called once the outcome of the latest target arrival is known.
    fn after_target_arrival(&mut self, time: f64) {
        match self.stopping {
            Stopping::Fixed(n) if self.target_arrivals >= n => {
                self.decide(time, AttackStatus::Success, None)
            }
            Stopping::Adaptive { min, max } if self.target_arrivals >= min => {
                let ranked = self.ranked(self.direction.expect("not refused"));
                if self.separated(&ranked) {
                    self.decide(time, AttackStatus::Success, None);
                } else if self.target_arrivals >= max {
                    self.decide(
                        time,
                        AttackStatus::Exhausted,
                        Some("confidence bound not reached".into()),
                    );
                }
            }
            _ => {}
        }
    }

    pub fn finish(&mut self) -> AttackResult {
        if let Some(reason) = &self.refusal {
            return AttackResult::exhausted(0, Some(reason.clone()));
        }
        if let Some(at) = self.awaiting.take() {
            self.after_target_arrival(at);
        }
        match &self.decision {
            Some(d) => d.clone(),
            None => AttackResult::exhausted(
                self.records,
                Some(format!("trace ended after {} target arrivals", self.target_arrivals)),
            ),
        }
    }
}

impl TraceSink for FrequencyAttack {
    fn observe(&mut self, record: &ObservationRecord) {
        if self.is_done() {
            return;
        }
        self.records += 1;
        match record {
            ObservationRecord::Arrival { time, sender } => {
                if let Some(at) = self.awaiting.take() {
                    self.after_target_arrival(at);
                    if self.is_done() {
                        return;
                    }
                }
                if *sender == self.target {
                    self.target_arrivals += 1;
                    self.awaiting = Some(*time);
                }
            }
            ObservationRecord::Departure { time, receivers } => {
                self.seen.extend(receivers.iter().copied());
                if let Some(at) = self.awaiting.take() {
                    if at == *time {
                        for r in receivers {
                            *self.counts.entry(*r).or_insert(0) += 1;
                        }
                    }
                    self.after_target_arrival(*time);
                }
            }
        }
    }
}

/// Runs the frequency attack over a stored sampling-mix trace.
pub fn stateless_frequency_attack(
    trace: &[ObservationRecord],
    target: SenderId,
    m: usize,
    rule: DecisionRule,
    stopping: Stopping,
) -> AttackResult {
    let mut attack = FrequencyAttack::new(target, m, rule, stopping);
    for rec in trace {
        if attack.is_done() {
            break;
        }
        attack.observe(rec);
    }
    attack.finish()
}
