//! Intersection attack on the batch mix.
//!
//! The batch mix is a deterministic function of its arrival sequence, so the
//! adversary replays it on the observed arrivals and knows exactly which
//! departures carry a message of the target. Each such recipient set holds
//! exactly one of the target's receivers.
//!
//! 1. Collect `m` pairwise-disjoint target sets `R_1..R_m`; each then holds a
//!    distinct receiver of the target.
//! 2. For every later target set `R` that meets exactly one `R_i`, replace
//!    `R_i` by `R ∩ R_i`. Sets meeting several `R_i` are dropped, since
//!    refining all of them could discard a true receiver.
//!
//! Identification is complete when every `R_i` is a singleton.

use std::collections::BTreeSet;

use super::{AttackResult, AttackStatus};
use crate::error::{Error, Result};
use crate::sim::{ObservationRecord, TraceSink};
use crate::{ReceiverId, SenderId};

#[derive(Debug, Clone)]
pub struct IntersectionAttack {
    k: usize,
    m: usize,
    target: SenderId,
    queue_len: Vec<usize>,
    non_empty: Vec<usize>,
    /// Batch the replay expects next: `(time, carries a target message)`.
    expected: Option<(f64, bool)>,
    last_time: f64,
    candidates: Vec<BTreeSet<ReceiverId>>,
    refinements: u64,
    discarded: u64,
    records: u64,
    success: Option<(f64, u64)>,
    error: Option<Error>,
}

impl IntersectionAttack {
    pub fn new(n: usize, k: usize, m: usize, target: SenderId) -> Result<Self> {
        if k < 2 || k > n || m == 0 || target.index() >= n {
            return Err(Error::InvalidParams(format!(
                "intersection attack needs 2 <= k <= n, m >= 1 and a valid target \
                 (n={n}, k={k}, m={m}, target={target})"
            )));
        }
        Ok(Self {
            k,
            m,
            target,
            queue_len: vec![0; n],
            non_empty: Vec::with_capacity(k),
            expected: None,
            last_time: 0.0,
            candidates: Vec::with_capacity(m),
            refinements: 0,
            discarded: 0,
            records: 0,
            success: None,
            error: None,
        })
    }

    /// Whether `k * m <= n`, the condition under which the attack is run.
    pub fn is_feasible(&self) -> bool {
        self.k * self.m <= self.queue_len.len()
    }

    pub fn candidates(&self) -> &[BTreeSet<ReceiverId>] {
        &self.candidates
    }

    /// Number of successful refinements applied so far.
    pub fn refinements(&self) -> u64 {
        self.refinements
    }

    /// Target sets dropped because they met more than one candidate.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn is_done(&self) -> bool {
        self.success.is_some() || self.error.is_some()
    }

    fn fail(&mut self, reason: impl Into<String>) {
        self.error = Some(Error::MalformedTrace {
            index: self.records as usize,
            reason: reason.into(),
        });
    }

    fn on_arrival(&mut self, time: f64, sender: SenderId) {
        if self.expected.is_some() {
            return self.fail("batch departure missing after the arrival that completed it");
        }
        let s = sender.index();
        if s >= self.queue_len.len() {
            return self.fail(format!("unknown sender {sender}"));
        }
        self.queue_len[s] += 1;
        if self.queue_len[s] == 1 {
            self.non_empty.push(s);
            if self.non_empty.len() == self.k {
                let tagged = self.non_empty.contains(&self.target.index());
                self.expected = Some((time, tagged));
                for &i in &self.non_empty {
                    self.queue_len[i] -= 1;
                }
                let lens = &self.queue_len;
                self.non_empty.retain(|&i| lens[i] > 0);
            }
        }
    }

    fn on_departure(&mut self, time: f64, receivers: &[ReceiverId]) {
        let Some((at, tagged)) = self.expected.take() else {
            return self.fail("departure not explained by any arrival");
        };
        if at != time {
            return self.fail("departure timestamp differs from its triggering arrival");
        }
        if receivers.len() != self.k {
            return self.fail(format!("batch of {} receivers, expected {}", receivers.len(), self.k));
        }
        if !tagged || !self.is_feasible() {
            return;
        }
        let set: BTreeSet<ReceiverId> = receivers.iter().copied().collect();
        if self.candidates.len() < self.m {
            if self.candidates.iter().all(|c| c.is_disjoint(&set)) {
                self.candidates.push(set);
            }
        } else {
            let mut hits = self.candidates.iter().enumerate().filter(|(_, c)| !c.is_disjoint(&set));
            match (hits.next(), hits.next()) {
                (Some((i, _)), None) => {
                    let refined: BTreeSet<_> = self.candidates[i].intersection(&set).copied().collect();
                    if refined.len() < self.candidates[i].len() {
                        self.refinements += 1;
                    }
                    self.candidates[i] = refined;
                }
                (Some(_), Some(_)) => self.discarded += 1,
                // Cannot happen on a consistent trace: every target set holds
                // one of the receivers already spread over the candidates.
                (None, _) => {}
            }
        }
        if self.candidates.len() == self.m && self.candidates.iter().all(|c| c.len() == 1) {
            self.success = Some((time, self.records));
        }
    }

    /// Result so far; `Exhausted` unless identification completed.
    pub fn finish(&self) -> Result<AttackResult> {
        if let Some(e) = &self.error {
            return Err(e.clone());
        }
        if !self.is_feasible() {
            return Ok(AttackResult::impossible(format!(
                "k*m = {} exceeds n = {}: identification cannot be guaranteed",
                self.k * self.m,
                self.queue_len.len()
            )));
        }
        Ok(match self.success {
            Some((ttd, used)) => AttackResult {
                status: AttackStatus::Success,
                identified: self.candidates.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect(),
                observations_used: used,
                ttd: Some(ttd),
                diagnostic: None,
            },
            None => AttackResult::exhausted(
                self.records,
                Some(format!(
                    "{} of {} disjoint sets collected, {} not yet singletons",
                    self.candidates.len(),
                    self.m,
                    self.candidates.iter().filter(|c| c.len() > 1).count()
                )),
            ),
        })
    }
}

impl TraceSink for IntersectionAttack {
    fn observe(&mut self, record: &ObservationRecord) {
        if self.is_done() {
            return;
        }
        self.records += 1;
        let time = record.time();
        if time < self.last_time {
            return self.fail("records out of time order");
        }
        self.last_time = time;
        match record {
            ObservationRecord::Arrival { time, sender } => self.on_arrival(*time, *sender),
            ObservationRecord::Departure { time, receivers } => self.on_departure(*time, receivers),
        }
    }
}

/// Runs the attack over a stored batch-mix trace.
pub fn intersection_attack(
    trace: &[ObservationRecord],
    target: SenderId,
    m: usize,
    n: usize,
    k: usize,
) -> Result<AttackResult> {
    let mut attack = IntersectionAttack::new(n, k, m, target)?;
    if !attack.is_feasible() {
        return attack.finish();
    }
    for rec in trace {
        attack.observe(rec);
        if attack.is_done() {
            break;
        }
    }
    attack.finish()
}
