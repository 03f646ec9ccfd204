use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{check_rate, Result};

pub type SimRng = ChaCha8Rng;

/// Substream ids below this value belong to per-sender arrival processes.
const RESERVED_BASE: u64 = 1 << 40;
pub(crate) const MIX_STREAM: u64 = RESERVED_BASE;
pub(crate) const RECEIVER_STREAM: u64 = RESERVED_BASE + 1;
pub(crate) const POPULATION_STREAM: u64 = RESERVED_BASE + 2;

/// Independent generator for `substream` under the master `seed`.
pub fn stream_rng(seed: u64, substream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(substream);
    rng
}

/// Endless sequence of i.i.d. `Exp(rate)` inter-arrival times.
#[derive(Debug, Clone)]
pub struct ExpStream {
    rng: SimRng,
    rate: f64,
}

impl ExpStream {
    pub fn rate(&self) -> f64 {
        self.rate
    }
}

impl Iterator for ExpStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let e: f64 = Exp1.sample(&mut self.rng);
        Some(e / self.rate)
    }
}

pub fn exp_stream(rate: f64, substream: u64, seed: u64) -> Result<ExpStream> {
    check_rate(rate)?;
    Ok(ExpStream { rng: stream_rng(seed, substream), rate })
}
