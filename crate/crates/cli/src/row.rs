//! CSV result rows.
//!
//! Floats are written with nine significant digits and rows quantize their
//! floats on construction, so writing and re-reading a row yields the same
//! value. Missing values are empty fields.

use std::cmp::Ordering;
use std::fmt;
use std::io;
use std::str::FromStr;

use mixq::adversary::AttackStatus;

use crate::config::{AttackKind, MixKind};

pub const HEADER: [&str; 24] = [
    "command",
    "mix",
    "n",
    "k",
    "lambda",
    "p_a",
    "m",
    "horizon",
    "warmup",
    "replication",
    "seed",
    "attack",
    "status",
    "mean_delay",
    "delay_p50",
    "delay_p95",
    "delay_p99",
    "load",
    "analytic_delay",
    "analytic_load",
    "attack_status",
    "correct",
    "observations_used",
    "ttd",
];

#[derive(Debug, thiserror::Error)]
pub enum RowError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("unexpected header {0:?}")]
    Header(Vec<String>),
    #[error("row {row}, column `{column}`: cannot parse {value:?}")]
    Field { row: usize, column: &'static str, value: String },
}

/// Outcome of a row's evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowStatus {
    Ok,
    /// The configuration has no steady state (batch `k = n`, sampling
    /// `k = 1`) or the approximation found none.
    Unstable,
    /// The fixed-point solver gave up.
    NonConvergence,
    Invalid,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Unstable => "unstable",
            Self::NonConvergence => "non_convergence",
            Self::Invalid => "invalid",
        }
    }
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RowStatus {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "ok" => Self::Ok,
            "unstable" => Self::Unstable,
            "non_convergence" => Self::NonConvergence,
            "invalid" => Self::Invalid,
            _ => return Err(()),
        })
    }
}

fn parse_attack_status(s: &str) -> Option<AttackStatus> {
    match s {
        "success" => Some(AttackStatus::Success),
        "exhausted" => Some(AttackStatus::Exhausted),
        "impossible" => Some(AttackStatus::Impossible),
        _ => None,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub command: String,
    pub mix: MixKind,
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub p_a: f64,
    pub m: usize,
    pub horizon: u64,
    pub warmup: f64,
    pub replication: usize,
    pub seed: u64,
    pub attack: AttackKind,
    pub status: RowStatus,
    pub mean_delay: Option<f64>,
    pub delay_p50: Option<f64>,
    pub delay_p95: Option<f64>,
    pub delay_p99: Option<f64>,
    /// Average fraction of time a queue is non-empty.
    pub load: Option<f64>,
    pub analytic_delay: Option<f64>,
    pub analytic_load: Option<f64>,
    pub attack_status: Option<AttackStatus>,
    /// Whether the identified receivers are exactly the target's.
    pub correct: Option<bool>,
    pub observations_used: Option<u64>,
    pub ttd: Option<f64>,
}

/// Rounds to the nine significant digits the CSV keeps.
pub fn sig9(x: f64) -> f64 {
    fmt_f64(x).parse().expect("formatted float parses")
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultRow {
    /// Quantizes every float to what the CSV stores.
    pub fn quantized(mut self) -> Self {
        self.lambda = sig9(self.lambda);
        self.p_a = sig9(self.p_a);
        self.warmup = sig9(self.warmup);
        for v in [
            &mut self.mean_delay,
            &mut self.delay_p50,
            &mut self.delay_p95,
            &mut self.delay_p99,
            &mut self.load,
            &mut self.analytic_delay,
            &mut self.analytic_load,
            &mut self.ttd,
        ] {
            *v = v.map(sig9);
        }
        self
    }

    pub fn to_record(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            self.command.clone(),
            self.mix.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            fmt_f64(self.lambda),
            fmt_f64(self.p_a),
            self.m.to_string(),
            self.horizon.to_string(),
            fmt_f64(self.warmup),
            self.replication.to_string(),
            self.seed.to_string(),
            self.attack.to_string(),
            self.status.to_string(),
            f(self.mean_delay),
            f(self.delay_p50),
            f(self.delay_p95),
            f(self.delay_p99),
            f(self.load),
            f(self.analytic_delay),
            f(self.analytic_load),
            opt(self.attack_status),
            opt(self.correct),
            opt(self.observations_used),
            f(self.ttd),
        ]
    }

    pub fn from_record(row: usize, rec: &csv::StringRecord) -> Result<Self, RowError> {
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize| RowError::Field { row, column: HEADER[i], value: field(i).into() };
        let req = |i: usize| -> Result<&str, RowError> {
            let s = field(i);
            if s.is_empty() { Err(bad(i)) } else { Ok(s) }
        };
        macro_rules! num {
            ($i:expr) => {
                req($i)?.parse().map_err(|_| bad($i))?
            };
        }
        macro_rules! opt_num {
            ($i:expr) => {
                match field($i) {
                    "" => None,
                    s => Some(s.parse().map_err(|_| bad($i))?),
                }
            };
        }
        Ok(Self {
            command: req(0)?.into(),
            mix: num!(1),
            n: num!(2),
            k: num!(3),
            lambda: num!(4),
            p_a: num!(5),
            m: num!(6),
            horizon: num!(7),
            warmup: num!(8),
            replication: num!(9),
            seed: num!(10),
            attack: num!(11),
            status: num!(12),
            mean_delay: opt_num!(13),
            delay_p50: opt_num!(14),
            delay_p95: opt_num!(15),
            delay_p99: opt_num!(16),
            load: opt_num!(17),
            analytic_delay: opt_num!(18),
            analytic_load: opt_num!(19),
            attack_status: match field(20) {
                "" => None,
                s => Some(parse_attack_status(s).ok_or_else(|| bad(20))?),
            },
            correct: opt_num!(21),
            observations_used: opt_num!(22),
            ttd: opt_num!(23),
        })
    }

    /// Ordering by configuration key, so output is independent of the order
    /// in which rows were computed.
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        (&self.command, self.mix, self.n, self.k)
            .cmp(&(&other.command, other.mix, other.n, other.k))
            .then(self.lambda.total_cmp(&other.lambda))
            .then(self.p_a.total_cmp(&other.p_a))
            .then((self.m, self.attack, self.replication).cmp(&(other.m, other.attack, other.replication)))
    }
}

pub fn write_rows<W: io::Write>(out: W, rows: &[ResultRow]) -> Result<(), RowError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEADER)?;
    for r in rows {
        w.write_record(r.to_record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<R: io::Read>(input: R) -> Result<Vec<ResultRow>, RowError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?;
    if header.iter().ne(HEADER) {
        return Err(RowError::Header(header.iter().map(String::from).collect()));
    }
    rd.records()
        .enumerate()
        .map(|(i, rec)| ResultRow::from_record(i + 1, &rec?))
        .collect()
}
