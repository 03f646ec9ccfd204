//! The four commands. Each expands the configuration into (point,
//! replication) jobs, runs them on the rayon pool and returns rows sorted by
//! configuration key.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use mixq::adversary::{
    stateful_sampling_attack, AttackResult, AttackStatus, DecisionRule, FrequencyAttack, IntersectionAttack,
    StatefulRules, Stopping,
};
use mixq::analytic::{
    efs_fixed_point, n2_mean_delay, n2_moments, sampling_load, sampling_mean_delay, BatchMixParams,
    SamplingMixParams,
};
use mixq::mixes::{BatchMix, Population, SamplingMix};
use mixq::sim::{self, Horizon, NullSink, ObservationRecord, RunOutput, SimConfig, TraceSink};
use mixq::{ReceiverId, SenderId};
use rayon::prelude::*;

use crate::config::{AttackKind, ConfigError, ExperimentConfig, MixKind, Point};
use crate::row::{ResultRow, RowStatus};

/// Minimum number of target arrivals before the frequency attack may stop.
const FREQUENCY_MIN_ARRIVALS: u64 = 100;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of one replication at one sweep point.
pub fn derive_seed(base: u64, point: usize, replication: usize) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(point as u64)) ^ replication as u64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub status: RowStatus,
    pub delay: Option<f64>,
    pub load: Option<f64>,
}

impl Prediction {
    fn ok(delay: f64, load: f64) -> Self {
        Self { status: RowStatus::Ok, delay: Some(delay), load: Some(load) }
    }

    fn failed(status: RowStatus) -> Self {
        Self { status, delay: None, load: None }
    }
}

fn status_of(e: &mixq::Error) -> RowStatus {
    match e {
        mixq::Error::Unstable => RowStatus::Unstable,
        mixq::Error::NonConvergence { .. } => RowStatus::NonConvergence,
        _ => RowStatus::Invalid,
    }
}

/// Analytic mean delay and per-queue load: exact for batch `k = 2`, the
/// fixed-point approximation for larger batches, closed form for sampling.
pub fn predict(mix: MixKind, p: &Point) -> Prediction {
    match mix {
        MixKind::Batch => {
            let Ok(params) = BatchMixParams::new(p.n, p.k, p.lambda) else {
                return Prediction::failed(RowStatus::Invalid);
            };
            if p.k == p.n {
                return Prediction::failed(RowStatus::Unstable);
            }
            if p.k == 2 {
                match (n2_mean_delay(&params), n2_moments(&params)) {
                    (Ok(d), Ok(m)) => Prediction::ok(d, m.load),
                    (Err(e), _) | (_, Err(e)) => Prediction::failed(status_of(&e)),
                }
            } else {
                match efs_fixed_point(&params) {
                    Ok(r) => Prediction::ok(r.mean_delay, r.rho),
                    Err(e) => Prediction::failed(status_of(&e)),
                }
            }
        }
        MixKind::Sampling => {
            let Ok(params) = SamplingMixParams::new(p.n, p.k, p.lambda, p.p_a) else {
                return Prediction::failed(RowStatus::Invalid);
            };
            if p.p_a == 1.0 {
                // Every message leaves on arrival.
                return Prediction::ok(0.0, 0.0);
            }
            if p.k == 1 {
                return Prediction::failed(RowStatus::Unstable);
            }
            match (sampling_mean_delay(&params), sampling_load(&params)) {
                (Ok(d), Ok(l)) => Prediction::ok(d, l),
                (Err(e), _) | (_, Err(e)) => Prediction::failed(status_of(&e)),
            }
        }
    }
}

/// Whether the mix itself has no steady state, whatever the analysis says.
fn mix_unstable(mix: MixKind, p: &Point) -> bool {
    match mix {
        MixKind::Batch => p.k == p.n,
        MixKind::Sampling => p.k == 1 && p.p_a < 1.0,
    }
}

fn base_row(cfg: &ExperimentConfig, command: &str, p: &Point, replication: usize, seed: u64) -> ResultRow {
    ResultRow {
        command: command.into(),
        mix: cfg.mix,
        n: p.n,
        k: p.k,
        lambda: p.lambda,
        p_a: p.p_a,
        m: cfg.m,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        replication,
        seed,
        attack: cfg.attack,
        status: RowStatus::Ok,
        mean_delay: None,
        delay_p50: None,
        delay_p95: None,
        delay_p99: None,
        load: None,
        analytic_delay: None,
        analytic_load: None,
        attack_status: None,
        correct: None,
        observations_used: None,
        ttd: None,
    }
}

fn run_mix<S: TraceSink>(
    mix: MixKind,
    p: &Point,
    population: &Population,
    sim_cfg: &SimConfig,
    sink: S,
) -> Result<RunOutput, ConfigError> {
    Ok(match mix {
        MixKind::Batch => {
            let params = BatchMixParams::new(p.n, p.k, p.lambda)?;
            sim::run(&mut BatchMix::new(&params), population, sim_cfg, sink)?
        }
        MixKind::Sampling => {
            let params = SamplingMixParams::new(p.n, p.k, p.lambda, p.p_a)?;
            sim::run(&mut SamplingMix::new(&params), population, sim_cfg, sink)?
        }
    })
}

/// Nearest-rank quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

fn jobs(points: &[Point], replications: usize) -> Vec<(usize, Point, usize)> {
    points
        .iter()
        .enumerate()
        .flat_map(|(i, p)| (0..replications).map(move |r| (i, *p, r)))
        .collect()
}

fn finish(mut rows: Vec<ResultRow>) -> Vec<ResultRow> {
    rows.sort_by(ResultRow::key_cmp);
    rows.into_iter().map(ResultRow::quantized).collect()
}

pub fn cmd_analytic(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, ConfigError> {
    let points = cfg.validate()?;
    let rows = points
        .par_iter()
        .map(|p| {
            let pred = predict(cfg.mix, p);
            let mut row = base_row(cfg, "analytic", p, 0, cfg.seed);
            row.status = pred.status;
            row.analytic_delay = pred.delay;
            row.analytic_load = pred.load;
            row
        })
        .collect();
    Ok(finish(rows))
}

fn simulate_one(cfg: &ExperimentConfig, p: &Point, rep: usize, seed: u64) -> Result<ResultRow, ConfigError> {
    let population = Population::new(p.n, cfg.m, seed)?;
    let sim_cfg = SimConfig::new(p.lambda, Horizon::Events(cfg.horizon), seed).warmup(cfg.warmup);
    let out = run_mix(cfg.mix, p, &population, &sim_cfg, NullSink)?;
    let mut delays: Vec<f64> = out.delays.iter().map(|d| d.delay).collect();
    delays.sort_unstable_by(f64::total_cmp);

    let pred = predict(cfg.mix, p);
    let mut row = base_row(cfg, "simulate", p, rep, seed);
    row.status = if mix_unstable(cfg.mix, p) { RowStatus::Unstable } else { RowStatus::Ok };
    row.mean_delay = (out.delay_count > 0).then_some(out.mean_delay);
    row.delay_p50 = quantile(&delays, 0.50);
    row.delay_p95 = quantile(&delays, 0.95);
    row.delay_p99 = quantile(&delays, 0.99);
    row.load = Some(out.stats.avg_load());
    row.analytic_delay = pred.delay;
    row.analytic_load = pred.load;
    Ok(row)
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, ConfigError> {
    let points = cfg.validate()?;
    let rows = jobs(&points, cfg.replications)
        .par_iter()
        .map(|&(i, p, r)| simulate_one(cfg, &p, r, derive_seed(cfg.seed, i, r)))
        .collect::<Result<_, _>>()?;
    Ok(finish(rows))
}

/// Simulated figures averaged over replications, beside the prediction.
pub fn cmd_compare(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, ConfigError> {
    let points = cfg.validate()?;
    let reps: Vec<(usize, ResultRow)> = jobs(&points, cfg.replications)
        .par_iter()
        .map(|&(i, p, r)| simulate_one(cfg, &p, r, derive_seed(cfg.seed, i, r)).map(|row| (i, row)))
        .collect::<Result<_, _>>()?;
    let mut by_point: BTreeMap<usize, Vec<ResultRow>> = BTreeMap::new();
    for (i, row) in reps {
        by_point.entry(i).or_default().push(row);
    }
    let rows = by_point
        .into_iter()
        .map(|(i, mut group)| {
            group.sort_by_key(|r| r.replication);
            let mean = |f: fn(&ResultRow) -> Option<f64>| {
                let v: Option<Vec<f64>> = group.iter().map(f).collect();
                v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
            };
            let mut row = base_row(cfg, "compare", &points[i], 0, cfg.seed);
            row.status = group[0].status;
            row.mean_delay = mean(|r| r.mean_delay);
            row.delay_p50 = mean(|r| r.delay_p50);
            row.delay_p95 = mean(|r| r.delay_p95);
            row.delay_p99 = mean(|r| r.delay_p99);
            row.load = mean(|r| r.load);
            row.analytic_delay = group[0].analytic_delay;
            row.analytic_load = group[0].analytic_load;
            row
        })
        .collect();
    Ok(finish(rows))
}

fn sorted(mut v: Vec<ReceiverId>) -> Vec<ReceiverId> {
    v.sort_unstable();
    v
}

fn attack_one(cfg: &ExperimentConfig, p: &Point, rep: usize, seed: u64) -> Result<ResultRow, ConfigError> {
    let target = SenderId(0);
    let population = Population::new(p.n, cfg.m, seed)?;
    let sim_cfg = SimConfig::new(p.lambda, Horizon::Events(cfg.horizon), seed)
        .warmup(cfg.warmup)
        .without_delays();
    let mut row = base_row(cfg, "attack", p, rep, seed);
    row.status = if mix_unstable(cfg.mix, p) { RowStatus::Unstable } else { RowStatus::Ok };

    let (out, result): (Option<RunOutput>, AttackResult) = match cfg.attack {
        AttackKind::Intersection => {
            let mut attack = IntersectionAttack::new(p.n, p.k, cfg.m, target)?;
            if attack.is_feasible() {
                let out = run_mix(cfg.mix, p, &population, &sim_cfg, &mut attack)?;
                (Some(out), attack.finish()?)
            } else {
                (None, attack.finish()?)
            }
        }
        AttackKind::Stateful => {
            let mut trace: Vec<ObservationRecord> = Vec::new();
            let out = run_mix(cfg.mix, p, &population, &sim_cfg.with_empty_oracle(), &mut trace)?;
            let universe: Vec<ReceiverId> = population.all_receivers().collect();
            let outcome = stateful_sampling_attack(
                &trace,
                out.empty_oracle.as_ref(),
                target,
                cfg.m,
                &universe,
                StatefulRules::BOTH,
            )?;
            (Some(out), outcome.result)
        }
        AttackKind::Stateless => {
            let mut attack = FrequencyAttack::new(
                target,
                cfg.m,
                DecisionRule::Auto { n: p.n, p_a: p.p_a },
                Stopping::Adaptive { min: FREQUENCY_MIN_ARRIVALS, max: u64::MAX },
            );
            let out = run_mix(cfg.mix, p, &population, &sim_cfg, &mut attack)?;
            (Some(out), attack.finish())
        }
        AttackKind::None => unreachable!("checked by cmd_attack"),
    };

    if let Some(out) = out {
        row.mean_delay = (out.delay_count > 0).then_some(out.mean_delay);
        row.load = Some(out.stats.avg_load());
    }
    row.attack_status = Some(result.status);
    row.correct = (result.status == AttackStatus::Success)
        .then(|| result.identified == sorted(population.receivers_of(target).to_vec()));
    row.observations_used = Some(result.observations_used);
    row.ttd = result.ttd;
    Ok(row)
}

pub fn cmd_attack(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, ConfigError> {
    let points = cfg.validate()?;
    match (cfg.attack, cfg.mix) {
        (AttackKind::None, _) => {
            return Err(ConfigError::Invalid("attack command needs --attack".into()));
        }
        (AttackKind::Intersection, MixKind::Sampling) => {
            return Err(ConfigError::Invalid("the intersection attack targets the batch mix".into()));
        }
        (AttackKind::Stateful | AttackKind::Stateless, MixKind::Batch) => {
            return Err(ConfigError::Invalid(format!("the {} attack targets the sampling mix", cfg.attack)));
        }
        _ => {}
    }
    let rows = jobs(&points, cfg.replications)
        .par_iter()
        .map(|&(i, p, r)| attack_one(cfg, &p, r, derive_seed(cfg.seed, i, r)))
        .collect::<Result<_, _>>()?;
    Ok(finish(rows))
}

fn point_key(r: &ResultRow) -> (usize, u64, u64) {
    (r.k, r.lambda.to_bits(), r.p_a.to_bits())
}

/// Human-readable per-point table for the terminal.
pub fn summary(rows: &[ResultRow]) -> String {
    let mut groups: Vec<(String, Vec<&ResultRow>)> = Vec::new();
    let mut last = None;
    for r in rows {
        let key = point_key(r);
        if last != Some(key) {
            groups.push((format!("k={} lambda={} p_a={}", r.k, r.lambda, r.p_a), Vec::new()));
            last = Some(key);
        }
        groups.last_mut().expect("pushed").1.push(r);
    }
    let mut s = String::new();
    for (label, g) in groups {
        let first = g[0];
        if first.command == "attack" {
            let success = g.iter().filter(|r| r.attack_status == Some(AttackStatus::Success)).count();
            let correct = g.iter().filter(|r| r.correct == Some(true)).count();
            let mut ttd: Vec<f64> = g.iter().filter_map(|r| r.ttd).collect();
            ttd.sort_unstable_by(f64::total_cmp);
            let median = quantile(&ttd, 0.5).map_or("-".into(), |t| format!("{t:.4}"));
            let _ = writeln!(
                s,
                "{label}: {} {}/{} success, {correct} correct, median ttd {median}",
                first.attack,
                success,
                g.len()
            );
        } else {
            let fmt = |v: Option<f64>| v.map_or("-".into(), |x| format!("{x:.6}"));
            let rel = match (first.mean_delay, first.analytic_delay) {
                (Some(m), Some(a)) if a != 0.0 => format!("{:+.2}%", 100.0 * (m - a) / a),
                _ => "-".into(),
            };
            let _ = writeln!(
                s,
                "{label}: {} delay {} analytic {} ({rel}) load {} analytic {}",
                first.status,
                fmt(first.mean_delay),
                fmt(first.analytic_delay),
                fmt(first.load),
                fmt(first.analytic_load)
            );
        }
    }
    s
}
