//! Attack on the sampling mix by an adversary that knows when the mix is
//! empty.
//!
//! - Identification: a target message that finds the mix empty either leaves
//!   alone at once (its queue was released) or nothing leaves. A singleton
//!   departure at that instant names a receiver of the target. Each such
//!   arrival succeeds independently with probability `p_a`.
//! - Elimination: while the target provably has no message in the mix, every
//!   departing receiver belongs to some other sender and is struck from the
//!   pool of possible partners.
//!
//! The bound on the target's pending messages is reset to zero whenever the
//! oracle reports an empty mix and is otherwise capped by the total number
//! of messages in the mix, which the adversary counts from the trace. It never
//! undercounts, so elimination is never wrong.

use std::collections::BTreeSet;

use super::{AttackResult, AttackStatus};
use crate::error::{Error, Result};
use crate::sim::{EmptyStateOracle, ObservationRecord};
use crate::{ReceiverId, SenderId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StatefulRules {
    pub identify: bool,
    pub eliminate: bool,
}

impl StatefulRules {
    pub const BOTH: Self = Self { identify: true, eliminate: true };
    pub const IDENTIFY_ONLY: Self = Self { identify: true, eliminate: false };
    pub const ELIMINATE_ONLY: Self = Self { identify: false, eliminate: true };
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatefulOutcome {
    pub result: AttackResult,
    /// For each firing of the identification rule over the whole trace, the
    /// number of target arrivals at an empty mix it took (including the
    /// successful one).
    pub identification_trials: Vec<u64>,
    /// Time of the first identification-rule firing.
    pub first_identification: Option<f64>,
    pub confirmed: Vec<ReceiverId>,
    pub eliminated: usize,
}

#[derive(Debug, Clone)]
pub struct StatefulAttack {
    target: SenderId,
    m: usize,
    rules: StatefulRules,
    pool: BTreeSet<ReceiverId>,
    confirmed: BTreeSet<ReceiverId>,
    eliminated: usize,
    in_mix: u64,
    target_bound: u64,
    /// Time of a target arrival at an empty mix awaiting its outcome.
    trial_at: Option<f64>,
    trials_since_fire: u64,
    trials: Vec<u64>,
    first_identification: Option<f64>,
    arrivals: usize,
    last_arrival: f64,
    records: u64,
    success: Option<(f64, u64, Vec<ReceiverId>)>,
}

impl StatefulAttack {
    /// `universe` is the set of all receivers served by the mix.
    pub fn new(target: SenderId, m: usize, universe: &[ReceiverId], rules: StatefulRules) -> Result<Self> {
        let pool: BTreeSet<_> = universe.iter().copied().collect();
        if m == 0 || pool.len() < m {
            return Err(Error::InvalidParams(format!(
                "need 1 <= m <= |universe|, got m={m}, |universe|={}",
                pool.len()
            )));
        }
        Ok(Self {
            target,
            m,
            rules,
            pool,
            confirmed: BTreeSet::new(),
            eliminated: 0,
            in_mix: 0,
            target_bound: 0,
            trial_at: None,
            trials_since_fire: 0,
            trials: Vec::new(),
            first_identification: None,
            arrivals: 0,
            last_arrival: 0.0,
            records: 0,
            success: None,
        })
    }

    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::MalformedTrace { index: self.records as usize - 1, reason: reason.into() }
    }

    /// Feeds one record; `mix_empty` must be `Some` for arrivals.
    pub fn observe(&mut self, record: &ObservationRecord, mix_empty: Option<bool>) -> Result<()> {
        self.records += 1;
        match record {
            ObservationRecord::Arrival { time, sender } => {
                self.trial_at = None;
                let empty = mix_empty.ok_or_else(|| self.malformed("no oracle reading for arrival"))?;
                if empty != (self.in_mix == 0) {
                    return Err(self.malformed("oracle disagrees with the message count"));
                }
                if *time < self.last_arrival {
                    return Err(self.malformed("arrivals out of time order"));
                }
                self.last_arrival = *time;
                self.arrivals += 1;
                if empty {
                    self.target_bound = 0;
                }
                self.in_mix += 1;
                if *sender == self.target {
                    self.target_bound += 1;
                    if empty && self.rules.identify {
                        self.trials_since_fire += 1;
                        self.trial_at = Some(*time);
                    }
                }
            }
            ObservationRecord::Departure { time, receivers } => {
                if *time != self.last_arrival || self.arrivals == 0 {
                    return Err(self.malformed("departure not synchronous with an arrival"));
                }
                let size = receivers.len() as u64;
                if size == 0 || size > self.in_mix {
                    return Err(self.malformed("batch larger than the mix content"));
                }
                if self.trial_at.take() == Some(*time) && receivers.len() == 1 {
                    self.confirmed.insert(receivers[0]);
                    self.target_bound -= 1;
                    self.trials.push(std::mem::take(&mut self.trials_since_fire));
                    self.first_identification.get_or_insert(*time);
                } else if self.rules.eliminate && self.target_bound == 0 {
                    for r in receivers {
                        if self.pool.remove(r) {
                            self.eliminated += 1;
                        }
                    }
                }
                self.in_mix -= size;
                self.target_bound = self.target_bound.min(self.in_mix);
                if self.success.is_none()
                    && (self.confirmed.len() >= self.m
                        || (self.rules.eliminate && self.pool.len() <= self.m))
                {
                    let identified = if self.confirmed.len() >= self.m {
                        self.confirmed.iter().copied().collect()
                    } else {
                        self.pool.iter().copied().collect()
                    };
                    self.success = Some((*time, self.records, identified));
                }
            }
        }
        Ok(())
    }

    pub fn outcome(&self) -> StatefulOutcome {
        let result = match &self.success {
            Some((ttd, used, identified)) => AttackResult {
                status: AttackStatus::Success,
                identified: identified.clone(),
                observations_used: *used,
                ttd: Some(*ttd),
                diagnostic: None,
            },
            None => AttackResult::exhausted(
                self.records,
                Some(format!(
                    "{} confirmed, {} candidates left",
                    self.confirmed.len(),
                    self.pool.len()
                )),
            ),
        };
        StatefulOutcome {
            result,
            identification_trials: self.trials.clone(),
            first_identification: self.first_identification,
            confirmed: self.confirmed.iter().copied().collect(),
            eliminated: self.eliminated,
        }
    }
}

/// Runs the attack over a full sampling-mix trace. Without an oracle the
/// attack has no premise and refuses.
pub fn stateful_sampling_attack(
    trace: &[ObservationRecord],
    oracle: Option<&EmptyStateOracle>,
    target: SenderId,
    m: usize,
    universe: &[ReceiverId],
    rules: StatefulRules,
) -> Result<StatefulOutcome> {
    let oracle = oracle.ok_or_else(|| {
        Error::AttackRefused("state-aware attack needs an empty-mix oracle".into())
    })?;
    let mut attack = StatefulAttack::new(target, m, universe, rules)?;
    let mut readings = oracle.empty_before_arrival.iter().copied();
    for rec in trace {
        let reading = match rec {
            ObservationRecord::Arrival { .. } => readings.next(),
            ObservationRecord::Departure { .. } => None,
        };
        attack.observe(rec, reading)?;
    }
    Ok(attack.outcome())
}
