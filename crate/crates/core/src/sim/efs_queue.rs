//! Single-server FIFO queue with Poisson arrivals where a customer arriving
//! to an empty system draws its service from an exceptional distribution.
//!
//! Used as an independent check of the closed-form mean wait in
//! [`crate::analytic::efs_mean_wait`].

use std::collections::VecDeque;

use rand_distr::{Distribution, Exp};

use super::{stream_rng, EventKind, EventQueue, SimRng};
use crate::error::{check_rate, Result};
use crate::SenderId;

const ARRIVAL_STREAM: u64 = 0;
const SERVICE_STREAM: u64 = 1;
const COMPLETION: EventKind = EventKind::Internal(0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfsQueueStats {
    pub customers: u64,
    /// Mean time from arrival to start of service.
    pub mean_wait: f64,
    pub mean_sojourn: f64,
    /// Fraction of the measured window the server was busy.
    pub busy_fraction: f64,
    /// Fraction of measured customers that found the system empty.
    pub first_fraction: f64,
}

/// Simulates `customers` arrivals, discarding the first `warmup` from the
/// averages.
pub fn simulate_efs_queue<F, G>(
    rate: f64,
    customers: u64,
    warmup: u64,
    seed: u64,
    mut regular: F,
    mut exceptional: G,
) -> Result<EfsQueueStats>
where
    F: FnMut(&mut SimRng) -> f64,
    G: FnMut(&mut SimRng) -> f64,
{
    check_rate(rate)?;
    let inter = Exp::new(rate).expect("rate checked");
    let mut arrival_rng = stream_rng(seed, ARRIVAL_STREAM);
    let mut service_rng = stream_rng(seed, SERVICE_STREAM);

    let mut events = EventQueue::new();
    events.push(inter.sample(&mut arrival_rng), EventKind::Arrival(SenderId(0)));
    let mut waiting: VecDeque<(u64, f64)> = VecDeque::new();
    // (customer index, arrival time) of the customer in service.
    let mut in_service: Option<(u64, f64)> = None;

    let mut arrived = 0u64;
    let (mut counted, mut firsts) = (0u64, 0u64);
    let (mut wait_sum, mut sojourn_sum) = (0.0, 0.0);
    let mut busy = 0.0;
    let mut window_start = None;
    let mut last_t = 0.0;

    while let Some(ev) = events.pop() {
        let t = ev.time;
        if window_start.is_some() && in_service.is_some() {
            busy += t - last_t;
        }
        last_t = t;
        match ev.kind {
            EventKind::Arrival(_) => {
                let id = arrived;
                arrived += 1;
                if id == warmup {
                    window_start = Some(t);
                }
                if arrived < customers {
                    events.push(t + inter.sample(&mut arrival_rng), ev.kind);
                }
                if in_service.is_none() {
                    let s = exceptional(&mut service_rng);
                    in_service = Some((id, t));
                    events.push(t + s, COMPLETION);
                    if id >= warmup {
                        counted += 1;
                        firsts += 1;
                    }
                } else {
                    waiting.push_back((id, t));
                }
            }
            EventKind::Internal(_) => {
                let (id, arr) = in_service.take().expect("completion without service");
                if id >= warmup {
                    sojourn_sum += t - arr;
                }
                if let Some((next, next_arr)) = waiting.pop_front() {
                    let s = regular(&mut service_rng);
                    in_service = Some((next, next_arr));
                    events.push(t + s, COMPLETION);
                    if next >= warmup {
                        counted += 1;
                        wait_sum += t - next_arr;
                    }
                }
            }
        }
    }

    let window = last_t - window_start.unwrap_or(last_t);
    Ok(EfsQueueStats {
        customers: counted,
        mean_wait: wait_sum / counted as f64,
        mean_sojourn: sojourn_sum / counted as f64,
        busy_fraction: if window > 0.0 { busy / window } else { 0.0 },
        first_fraction: firsts as f64 / counted as f64,
    })
}
