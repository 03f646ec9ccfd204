//! Queueing models, discrete-event simulation and traffic-analysis attacks
//! for `(n, k)` anonymity mixes.
//!
//! The crate is split along the lines of the problem:
//!
//! - [`order_stats`]: order statistics of i.i.d. exponentials, the building
//!   block of every batch-formation delay.
//! - [`analytic`]: the exact `(n, 2)` batch-mix solution, the M/G/1 with
//!   exceptional first service approximation for larger batches, and the
//!   sampling-mix closed forms.
//! - [`sim`]: a seedable discrete-event engine that drives a mix and emits
//!   what a passive observer sees.
//! - [`mixes`]: the deterministic batch mix and the randomized sampling mix.
//! - [`adversary`]: intersection, state-aware and frequency attacks against
//!   observation traces.

pub mod adversary;
pub mod analytic;
mod error;
pub mod mixes;
pub mod order_stats;
pub mod sim;

pub use error::{Error, Result};

use std::fmt;

/// Index of a sender, which is also the index of its queue in the mix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SenderId(pub u32);

/// Identifier of a message recipient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReceiverId(pub u32);

impl SenderId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SenderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

impl fmt::Display for ReceiverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}
