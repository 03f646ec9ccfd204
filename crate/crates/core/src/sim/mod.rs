//! Seedable discrete-event engine for mixes.
//!
//! Every sender is an independent Poisson process drawn from its own ChaCha
//! substream of the master seed; the mix's internal randomness and receiver
//! choice use further reserved substreams. A run is therefore a deterministic
//! function of `(mix, population, config)`.
//!
//! Mixes react synchronously to arrivals, so the only scheduled events are
//! arrivals. Each arrival produces an [`ObservationRecord::Arrival`] and, if
//! it triggers a release, one [`ObservationRecord::Departure`] holding the
//! whole batch with the same timestamp.

pub mod efs_queue;
mod event;
mod stream;

pub use event::{Event, EventKind, EventQueue};
pub use stream::{exp_stream, stream_rng, ExpStream, SimRng};
pub(crate) use stream::{MIX_STREAM, POPULATION_STREAM, RECEIVER_STREAM};

use crate::error::{check_rate, Error, Result};
use crate::mixes::Population;
use crate::{ReceiverId, SenderId};

/// A message inside the mix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub sender: SenderId,
    pub receiver: ReceiverId,
    pub arrival: f64,
    /// Global arrival ordinal.
    pub seq: u64,
}

/// A mix policy driven by the engine.
pub trait MixModel {
    fn senders(&self) -> usize;

    /// Enqueues `msg` and appends every message released by this arrival to
    /// `out`.
    fn on_arrival(&mut self, msg: Message, rng: &mut SimRng, out: &mut Vec<Message>);
}

/// What a passive observer of the mix's links sees.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservationRecord {
    Arrival { time: f64, sender: SenderId },
    /// One released batch; receivers are sorted so intra-batch order carries
    /// no information.
    Departure { time: f64, receivers: Vec<ReceiverId> },
}

impl ObservationRecord {
    pub fn time(&self) -> f64 {
        match self {
            Self::Arrival { time, .. } | Self::Departure { time, .. } => *time,
        }
    }
}

/// Online consumer of an observation trace.
pub trait TraceSink {
    fn observe(&mut self, record: &ObservationRecord);
}

impl TraceSink for Vec<ObservationRecord> {
    fn observe(&mut self, record: &ObservationRecord) {
        self.push(record.clone());
    }
}

/// Discards the trace.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullSink;

impl TraceSink for NullSink {
    fn observe(&mut self, _record: &ObservationRecord) {}
}

impl<S: TraceSink + ?Sized> TraceSink for &mut S {
    fn observe(&mut self, record: &ObservationRecord) {
        (**self).observe(record)
    }
}

impl<A: TraceSink, B: TraceSink> TraceSink for (A, B) {
    fn observe(&mut self, record: &ObservationRecord) {
        self.0.observe(record);
        self.1.observe(record);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelaySample {
    pub sender: SenderId,
    pub delay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    /// Stop after this many arrivals.
    Events(u64),
    /// Stop at this simulation time.
    Time(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Per-sender Poisson rate.
    pub rate: f64,
    pub horizon: Horizon,
    pub seed: u64,
    /// Leading fraction of the horizon (messages or time) excluded from
    /// statistics.
    pub warmup_fraction: f64,
    pub record_delays: bool,
    pub record_empty_oracle: bool,
    /// Hard cap on arrivals for time horizons.
    pub max_events: u64,
}

impl SimConfig {
    pub fn new(rate: f64, horizon: Horizon, seed: u64) -> Self {
        Self {
            rate,
            horizon,
            seed,
            warmup_fraction: 0.1,
            record_delays: true,
            record_empty_oracle: false,
            max_events: 200_000_000,
        }
    }

    pub fn warmup(mut self, fraction: f64) -> Self {
        self.warmup_fraction = fraction;
        self
    }

    pub fn with_empty_oracle(mut self) -> Self {
        self.record_empty_oracle = true;
        self
    }

    pub fn without_delays(mut self) -> Self {
        self.record_delays = false;
        self
    }
}

/// Time-averaged queue statistics over the post-warm-up window.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueStats {
    pub window: f64,
    pub mean_len: Vec<f64>,
    pub mean_sq_len: Vec<f64>,
    /// Fraction of the window each queue was non-empty.
    pub load: Vec<f64>,
    pub max_len: Vec<usize>,
    /// Time spent with `i` messages in the whole mix.
    pub state_time: Vec<f64>,
    /// Number of arrivals that found `i` messages in the mix.
    pub state_seen_by_arrivals: Vec<u64>,
}

impl QueueStats {
    fn avg(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    pub fn avg_load(&self) -> f64 {
        Self::avg(&self.load)
    }

    pub fn avg_mean_len(&self) -> f64 {
        Self::avg(&self.mean_len)
    }

    pub fn avg_mean_sq_len(&self) -> f64 {
        Self::avg(&self.mean_sq_len)
    }

    pub fn mean_total_len(&self) -> f64 {
        self.mean_len.iter().sum()
    }

    pub fn max_queue_len(&self) -> usize {
        self.max_len.iter().copied().max().unwrap_or(0)
    }
}

/// For each arrival, in trace order, whether the mix held no message just
/// before it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmptyStateOracle {
    pub empty_before_arrival: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub delays: Vec<DelaySample>,
    /// Count and mean of measured delays, kept even when samples are not.
    pub delay_count: u64,
    pub mean_delay: f64,
    pub stats: QueueStats,
    pub arrivals_per_sender: Vec<u64>,
    pub departures_per_sender: Vec<u64>,
    /// Post-warm-up messages still enqueued at the end of the run.
    pub undelivered: u64,
    pub warmup_start: f64,
    pub end_time: f64,
    /// True when a time horizon was cut short by `max_events`.
    pub truncated: bool,
    pub empty_oracle: Option<EmptyStateOracle>,
}

impl RunOutput {
    pub fn arrivals(&self) -> u64 {
        self.arrivals_per_sender.iter().sum()
    }

    pub fn departures(&self) -> u64 {
        self.departures_per_sender.iter().sum()
    }
}

struct Tracker {
    started: bool,
    start: f64,
    len: Vec<usize>,
    last: Vec<f64>,
    area: Vec<f64>,
    area_sq: Vec<f64>,
    busy: Vec<f64>,
    max_len: Vec<usize>,
    total: usize,
    total_last: f64,
    state_time: Vec<f64>,
    state_seen: Vec<u64>,
}

impl Tracker {
    fn new(n: usize) -> Self {
        Self {
            started: false,
            start: 0.0,
            len: vec![0; n],
            last: vec![0.0; n],
            area: vec![0.0; n],
            area_sq: vec![0.0; n],
            busy: vec![0.0; n],
            max_len: vec![0; n],
            total: 0,
            total_last: 0.0,
            state_time: Vec::new(),
            state_seen: Vec::new(),
        }
    }

    fn begin(&mut self, t: f64) {
        self.started = true;
        self.start = t;
        self.last.iter_mut().for_each(|l| *l = t);
        self.total_last = t;
    }

    fn flush_queue(&mut self, i: usize, t: f64) {
        if self.started {
            let dt = t - self.last[i];
            let l = self.len[i] as f64;
            self.area[i] += l * dt;
            self.area_sq[i] += l * l * dt;
            if self.len[i] > 0 {
                self.busy[i] += dt;
            }
        }
        self.last[i] = t;
    }

    fn flush_total(&mut self, t: f64) {
        if self.started {
            bump(&mut self.state_time, self.total, t - self.total_last);
        }
        self.total_last = t;
    }

    fn change(&mut self, i: usize, t: f64, up: bool) {
        self.flush_queue(i, t);
        self.flush_total(t);
        if up {
            self.len[i] += 1;
            self.total += 1;
            if self.started {
                self.max_len[i] = self.max_len[i].max(self.len[i]);
            }
        } else {
            self.len[i] -= 1;
            self.total -= 1;
        }
    }

    fn seen_by_arrival(&mut self) {
        if self.started {
            bump(&mut self.state_seen, self.total, 1);
        }
    }

    fn finish(mut self, end: f64) -> QueueStats {
        if !self.started {
            self.begin(end);
        }
        for i in 0..self.len.len() {
            self.flush_queue(i, end);
        }
        self.flush_total(end);
        let window = end - self.start;
        let norm = |v: Vec<f64>| -> Vec<f64> {
            if window > 0.0 {
                v.into_iter().map(|x| x / window).collect()
            } else {
                vec![0.0; v.len()]
            }
        };
        QueueStats {
            window,
            mean_len: norm(self.area),
            mean_sq_len: norm(self.area_sq),
            load: norm(self.busy),
            max_len: self.max_len,
            state_time: self.state_time,
            state_seen_by_arrivals: self.state_seen,
        }
    }
}

fn bump<T: Copy + Default + std::ops::AddAssign>(v: &mut Vec<T>, idx: usize, by: T) {
    if v.len() <= idx {
        v.resize(idx + 1, T::default());
    }
    v[idx] += by;
}

enum Warmup {
    Index(u64),
    Time(f64),
}

/// Drives `mix` with Poisson arrivals until the horizon, streaming the
/// observation trace into `sink`.
pub fn run<M, S>(
    mix: &mut M,
    population: &Population,
    cfg: &SimConfig,
    mut sink: S,
) -> Result<RunOutput>
where
    M: MixModel + ?Sized,
    S: TraceSink,
{
    check_rate(cfg.rate)?;
    if !(0.0..1.0).contains(&cfg.warmup_fraction) {
        return Err(Error::InvalidParams(format!(
            "warm-up fraction must lie in [0, 1), got {}",
            cfg.warmup_fraction
        )));
    }
    let n = mix.senders();
    if population.senders() != n {
        return Err(Error::InvalidParams(format!(
            "population has {} senders but the mix has {n}",
            population.senders()
        )));
    }
    let (max_arrivals, time_limit, warm) = match cfg.horizon {
        Horizon::Events(count) => (
            count,
            f64::INFINITY,
            Warmup::Index((cfg.warmup_fraction * count as f64).floor() as u64),
        ),
        Horizon::Time(t) if t > 0.0 && t.is_finite() => {
            (cfg.max_events, t, Warmup::Time(cfg.warmup_fraction * t))
        }
        Horizon::Time(t) => {
            return Err(Error::InvalidParams(format!("time horizon must be positive, got {t}")))
        }
    };

    let mut streams: Vec<ExpStream> = (0..n)
        .map(|i| exp_stream(cfg.rate, i as u64, cfg.seed))
        .collect::<Result<_>>()?;
    let mut mix_rng = stream_rng(cfg.seed, MIX_STREAM);
    let mut receiver_rng = stream_rng(cfg.seed, RECEIVER_STREAM);

    let mut events = EventQueue::new();
    for (i, s) in streams.iter_mut().enumerate() {
        events.push(s.next().expect("endless"), EventKind::Arrival(SenderId(i as u32)));
    }

    let mut tracker = Tracker::new(n);
    let mut arrivals_per_sender = vec![0u64; n];
    let mut departures_per_sender = vec![0u64; n];
    let mut delays = Vec::new();
    let (mut delay_count, mut delay_sum) = (0u64, 0.0f64);
    let mut oracle = cfg.record_empty_oracle.then(EmptyStateOracle::default);
    let mut released = Vec::with_capacity(n);
    let mut seq = 0u64;
    let mut end_time = 0.0;
    let mut warm_cut = match warm {
        Warmup::Index(_) => None,
        Warmup::Time(t) => Some(t),
    };

    while seq < max_arrivals {
        let ev = events.pop().expect("one pending arrival per sender");
        if ev.time > time_limit {
            break;
        }
        let EventKind::Arrival(sender) = ev.kind else {
            unreachable!("mix runs only schedule arrivals")
        };
        let t = ev.time;
        let s = sender.index();
        events.push(t + streams[s].next().expect("endless"), ev.kind);

        if !tracker.started {
            match warm {
                Warmup::Index(idx) if seq >= idx => {
                    tracker.begin(t);
                    warm_cut = Some(t);
                }
                Warmup::Time(w) if t >= w => tracker.begin(w),
                _ => {}
            }
        }

        if let Some(o) = oracle.as_mut() {
            o.empty_before_arrival.push(tracker.total == 0);
        }
        tracker.seen_by_arrival();
        let receiver = population.assign_receiver(sender, &mut receiver_rng);
        let msg = Message { sender, receiver, arrival: t, seq };
        seq += 1;
        arrivals_per_sender[s] += 1;
        tracker.change(s, t, true);

        sink.observe(&ObservationRecord::Arrival { time: t, sender });

        released.clear();
        mix.on_arrival(msg, &mut mix_rng, &mut released);
        if !released.is_empty() {
            let mut receivers = Vec::with_capacity(released.len());
            for m in &released {
                let i = m.sender.index();
                departures_per_sender[i] += 1;
                tracker.change(i, t, false);
                receivers.push(m.receiver);
                let in_window = match warm {
                    Warmup::Index(idx) => m.seq >= idx,
                    Warmup::Time(w) => m.arrival >= w,
                };
                if in_window {
                    let delay = t - m.arrival;
                    delay_count += 1;
                    delay_sum += delay;
                    if cfg.record_delays {
                        delays.push(DelaySample { sender: m.sender, delay });
                    }
                }
            }
            receivers.sort_unstable();
            sink.observe(&ObservationRecord::Departure { time: t, receivers });
        }
        end_time = t;
    }

    let truncated = matches!(cfg.horizon, Horizon::Time(_)) && seq >= max_arrivals;
    if let Horizon::Time(t) = cfg.horizon {
        if !truncated {
            end_time = t;
        }
    }
    let warmup_start = warm_cut.unwrap_or(end_time);
    let delivered_in_window = delay_count;
    let arrived_in_window = match warm {
        Warmup::Index(idx) => seq.saturating_sub(idx),
        Warmup::Time(_) => tracker.state_seen.iter().sum(),
    };

    Ok(RunOutput {
        delays,
        delay_count,
        mean_delay: if delay_count > 0 { delay_sum / delay_count as f64 } else { 0.0 },
        stats: tracker.finish(end_time),
        arrivals_per_sender,
        departures_per_sender,
        undelivered: arrived_in_window - delivered_in_window,
        warmup_start,
        end_time,
        truncated,
        empty_oracle: oracle,
    })
}
