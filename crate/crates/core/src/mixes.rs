//! Mix policies plugged into [`crate::sim`].
//!
//! - [`BatchMix`]: as soon as `k` queues are non-empty, the head-of-line
//!   message of each is dispatched. Deterministic given the arrival sequence.
//! - [`SamplingMix`]: every arrival releases `k` randomly chosen queues; the
//!   arriving queue is among them with probability `p_a`.

use std::collections::VecDeque;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::analytic::{BatchMixParams, SamplingMixParams};
use crate::error::{Error, Result};
use crate::sim::{self, Horizon, Message, MixModel, NullSink, SimConfig, SimRng, POPULATION_STREAM};
use crate::{ReceiverId, SenderId};

/// Per-sender FIFO queues shared by both policies.
#[derive(Debug, Clone)]
struct Queues {
    queues: Vec<VecDeque<Message>>,
}

impl Queues {
    fn new(n: usize) -> Self {
        Self { queues: vec![VecDeque::new(); n] }
    }

    fn len(&self, i: usize) -> usize {
        self.queues[i].len()
    }
}

#[derive(Debug, Clone)]
pub struct BatchMix {
    k: usize,
    queues: Queues,
    /// Indices of the currently non-empty queues, fewer than `k` between
    /// arrivals.
    non_empty: Vec<usize>,
}

impl BatchMix {
    pub fn new(params: &BatchMixParams) -> Self {
        Self::with_size(params.n, params.k)
    }

    /// Unchecked sizes, for callers that already validated `2 <= k <= n`.
    pub fn with_size(n: usize, k: usize) -> Self {
        debug_assert!(k >= 1 && k <= n);
        Self { k, queues: Queues::new(n), non_empty: Vec::with_capacity(k) }
    }

    pub fn queue_len(&self, sender: usize) -> usize {
        self.queues.len(sender)
    }

    pub fn non_empty_count(&self) -> usize {
        self.non_empty.len()
    }

    /// Enqueues `msg`; if that makes `k` queues non-empty, dispatches the
    /// head of each into `out`.
    pub fn on_arrival_det(&mut self, msg: Message, out: &mut Vec<Message>) {
        let s = msg.sender.index();
        let q = &mut self.queues.queues[s];
        q.push_back(msg);
        if q.len() > 1 {
            return;
        }
        self.non_empty.push(s);
        if self.non_empty.len() < self.k {
            return;
        }
        let queues = &mut self.queues.queues;
        for &i in &self.non_empty {
            out.push(queues[i].pop_front().expect("listed as non-empty"));
        }
        self.non_empty.retain(|&i| !queues[i].is_empty());
    }
}

impl MixModel for BatchMix {
    fn senders(&self) -> usize {
        self.queues.queues.len()
    }

    fn on_arrival(&mut self, msg: Message, _rng: &mut SimRng, out: &mut Vec<Message>) {
        self.on_arrival_det(msg, out);
    }
}

#[derive(Debug, Clone)]
pub struct SamplingMix {
    k: usize,
    p_a: f64,
    queues: Queues,
}

impl SamplingMix {
    pub fn new(params: &SamplingMixParams) -> Self {
        Self { k: params.k, p_a: params.p_a, queues: Queues::new(params.n) }
    }

    pub fn queue_len(&self, sender: usize) -> usize {
        self.queues.len(sender)
    }

    /// Queues released by an arrival to `arriving`, drawn from `rng`.
    fn release_set<R: Rng + ?Sized>(&self, arriving: usize, rng: &mut R) -> Vec<usize> {
        let n = self.queues.queues.len();
        let include_self = self.p_a >= 1.0 || (self.p_a > 0.0 && rng.random_bool(self.p_a));
        let draw = if include_self { self.k - 1 } else { self.k };
        let mut set: Vec<usize> = index::sample(rng, n - 1, draw)
            .into_iter()
            .map(|i| if i >= arriving { i + 1 } else { i })
            .collect();
        if include_self {
            set.push(arriving);
        }
        set
    }
}

impl MixModel for SamplingMix {
    fn senders(&self) -> usize {
        self.queues.queues.len()
    }

    fn on_arrival(&mut self, msg: Message, rng: &mut SimRng, out: &mut Vec<Message>) {
        let s = msg.sender.index();
        self.queues.queues[s].push_back(msg);
        let mut released = self.release_set(s, rng);
        // Batch composition must not depend on the sampling order.
        released.sort_unstable();
        for i in released {
            if let Some(m) = self.queues.queues[i].pop_front() {
                out.push(m);
            }
        }
    }
}

/// Disjoint receiver sets, one of size `m` per sender.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    receivers: Vec<Vec<ReceiverId>>,
}

impl Population {
    /// Receiver ids `0..n*m` are shuffled and dealt out so ids carry no hint
    /// of their sender.
    pub fn new(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParams("each sender needs at least one receiver".into()));
        }
        let mut ids: Vec<ReceiverId> = (0..(n * m) as u32).map(ReceiverId).collect();
        ids.shuffle(&mut sim::stream_rng(seed, POPULATION_STREAM));
        Ok(Self { receivers: ids.chunks(m).map(<[ReceiverId]>::to_vec).collect() })
    }

    pub fn from_sets(receivers: Vec<Vec<ReceiverId>>) -> Result<Self> {
        let m = receivers.first().map_or(0, Vec::len);
        if m == 0 || receivers.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidParams("receiver sets must share a size m >= 1".into()));
        }
        let mut all: Vec<_> = receivers.iter().flatten().copied().collect();
        all.sort_unstable();
        if all.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams("receiver sets must be disjoint".into()));
        }
        Ok(Self { receivers })
    }

    pub fn senders(&self) -> usize {
        self.receivers.len()
    }

    pub fn receivers_per_sender(&self) -> usize {
        self.receivers[0].len()
    }

    pub fn receivers_of(&self, sender: SenderId) -> &[ReceiverId] {
        &self.receivers[sender.index()]
    }

    pub fn all_receivers(&self) -> impl Iterator<Item = ReceiverId> + '_ {
        self.receivers.iter().flatten().copied()
    }

    pub fn sender_of(&self, receiver: ReceiverId) -> Option<SenderId> {
        self.receivers
            .iter()
            .position(|r| r.contains(&receiver))
            .map(|i| SenderId(i as u32))
    }

    /// Uniform choice among the sender's receivers.
    pub fn assign_receiver<R: Rng + ?Sized>(&self, sender: SenderId, rng: &mut R) -> ReceiverId {
        let set = &self.receivers[sender.index()];
        if set.len() == 1 {
            set[0]
        } else {
            set[rng.random_range(0..set.len())]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityClass {
    StableLike,
    UnstableLike,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub horizon: u64,
    pub mean_total_len: f64,
    pub max_queue_len: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub points: Vec<ProbePoint>,
    pub class: StabilityClass,
}

/// Relative change of the time-averaged total length between the two largest
/// horizons below which a run is called stable-like.
pub const STABLE_REL_CHANGE: f64 = 0.05;

/// Runs the mix built by `make_mix` to each event-count horizon (same seed,
/// so shorter runs are prefixes of longer ones) and classifies the growth.
pub fn stability_probe<M, F>(
    mut make_mix: F,
    rate: f64,
    horizons: &[u64],
    seed: u64,
    warmup_fraction: f64,
) -> Result<StabilityReport>
where
    M: MixModel,
    F: FnMut() -> M,
{
    if horizons.len() < 2 || horizons.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams(
            "stability probe needs at least two strictly increasing horizons".into(),
        ));
    }
    let mut points = Vec::with_capacity(horizons.len());
    for &h in horizons {
        let mut mix = make_mix();
        let population = Population::new(mix.senders(), 1, seed)?;
        let cfg = SimConfig::new(rate, Horizon::Events(h), seed)
            .warmup(warmup_fraction)
            .without_delays();
        let out = sim::run(&mut mix, &population, &cfg, NullSink)?;
        points.push(ProbePoint {
            horizon: h,
            mean_total_len: out.stats.mean_total_len(),
            max_queue_len: out.stats.max_queue_len(),
        });
    }
    let [.., a, b] = points.as_slice() else { unreachable!() };
    let rel = (b.mean_total_len - a.mean_total_len).abs() / a.mean_total_len.max(f64::MIN_POSITIVE);
    let class = if rel < STABLE_REL_CHANGE {
        StabilityClass::StableLike
    } else if points.windows(2).all(|w| w[1].max_queue_len > w[0].max_queue_len) {
        StabilityClass::UnstableLike
    } else {
        StabilityClass::Inconclusive
    };
    Ok(StabilityReport { points, class })
}
