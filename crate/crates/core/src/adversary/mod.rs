//! Passive attacks on observation traces.
//!
//! All attacks consume [`ObservationRecord`]s, either from a stored trace or
//! online as a [`crate::sim::TraceSink`], and report an [`AttackResult`]
//! whose `ttd` is the simulation time at which the target's receivers were
//! identified.
//!
//! [`ObservationRecord`]: crate::sim::ObservationRecord

mod frequency;
mod intersection;
mod stateful;

pub use frequency::{stateless_frequency_attack, DecisionRule, FrequencyAttack, Stopping};
pub use intersection::{intersection_attack, IntersectionAttack};
pub use stateful::{stateful_sampling_attack, StatefulAttack, StatefulOutcome, StatefulRules};

use std::fmt;

use crate::ReceiverId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttackStatus {
    Success,
    /// The trace ended (or the attack declined to decide) before
    /// identification.
    Exhausted,
    /// Identification cannot be guaranteed for these parameters.
    Impossible,
}

impl AttackStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Success => "success",
            Self::Exhausted => "exhausted",
            Self::Impossible => "impossible",
        }
    }
}

impl fmt::Display for AttackStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub status: AttackStatus,
    /// Sorted receiver ids attributed to the target.
    pub identified: Vec<ReceiverId>,
    /// Trace records consumed up to the decision (or the whole trace).
    pub observations_used: u64,
    /// Simulation time of identification.
    pub ttd: Option<f64>,
    pub diagnostic: Option<String>,
}

impl AttackResult {
    pub(crate) fn impossible(reason: String) -> Self {
        Self {
            status: AttackStatus::Impossible,
            identified: Vec::new(),
            observations_used: 0,
            ttd: None,
            diagnostic: Some(reason),
        }
    }

    pub(crate) fn exhausted(observations_used: u64, diagnostic: Option<String>) -> Self {
        Self {
            status: AttackStatus::Exhausted,
            identified: Vec::new(),
            observations_used,
            ttd: None,
            diagnostic,
        }
    }
}
