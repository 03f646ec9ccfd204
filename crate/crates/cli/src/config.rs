//! Experiment configuration: a flat `key = value` file, overridden by flags.
//!
//! Keys use the flag names with `_` or `-` interchangeably (`p_a`, `p-a`).
//! Blank lines and lines starting with `#` are ignored.

use std::fmt;
use std::path::Path;

use clap::ValueEnum;
use mixq::analytic::{BatchMixParams, SamplingMixParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {value:?}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Params(#[from] mixq::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum MixKind {
    Batch,
    Sampling,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum SweepAxis {
    None,
    K,
    Lambda,
    #[value(name = "p_a", alias = "p-a")]
    PA,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum)]
pub enum AttackKind {
    None,
    Intersection,
    Stateful,
    Stateless,
}

macro_rules! value_display {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let v = self.to_possible_value().expect("no skipped variants");
                f.write_str(v.get_name())
            }
        }

        impl std::str::FromStr for $t {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                <$t as ValueEnum>::from_str(s, true)
            }
        }
    )*};
}

value_display!(MixKind, SweepAxis, AttackKind);

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mix: MixKind,
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub p_a: f64,
    /// Receivers per sender.
    pub m: usize,
    /// Arrivals per replication.
    pub horizon: u64,
    pub seed: u64,
    pub replications: usize,
    pub warmup: f64,
    pub sweep: SweepAxis,
    pub values: Vec<f64>,
    pub attack: AttackKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mix: MixKind::Batch,
            n: 40,
            k: 2,
            lambda: 1.0,
            p_a: 0.5,
            m: 1,
            horizon: 1_000_000,
            seed: 1,
            replications: 1,
            warmup: 0.1,
            sweep: SweepAxis::None,
            values: Vec::new(),
            attack: AttackKind::None,
        }
    }
}

/// One parameter point of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub n: usize,
    pub k: usize,
    pub lambda: f64,
    pub p_a: f64,
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue { key: key.into(), value: value.into() })
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "mix" => self.mix = parse_value(key, value)?,
            "n" => self.n = parse_value(key, value)?,
            "k" => self.k = parse_value(key, value)?,
            "lambda" => self.lambda = parse_value(key, value)?,
            "p_a" => self.p_a = parse_value(key, value)?,
            "m" => self.m = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "replications" => self.replications = parse_value(key, value)?,
            "warmup" => self.warmup = parse_value(key, value)?,
            "sweep" => self.sweep = parse_value(key, value)?,
            "values" => self.values = parse_list(key, value)?,
            "attack" => self.attack = parse_value(key, value)?,
            _ => return Err(ConfigError::UnknownKey(key.trim().into())),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.into(),
            })?;
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_str(&text)
    }

    /// Expands the sweep into parameter points, in the order of `values`.
    pub fn points(&self) -> Result<Vec<Point>, ConfigError> {
        let base = Point { n: self.n, k: self.k, lambda: self.lambda, p_a: self.p_a };
        if self.sweep == SweepAxis::None {
            return Ok(vec![base]);
        }
        if self.values.is_empty() {
            return Err(ConfigError::Invalid(format!("sweep over {} needs a list of values", self.sweep)));
        }
        self.values
            .iter()
            .map(|&v| {
                let mut p = base;
                match self.sweep {
                    SweepAxis::K => {
                        if v.fract() != 0.0 || v < 1.0 {
                            return Err(ConfigError::BadValue { key: "values".into(), value: v.to_string() });
                        }
                        p.k = v as usize;
                    }
                    SweepAxis::Lambda => p.lambda = v,
                    SweepAxis::PA => p.p_a = v,
                    SweepAxis::None => unreachable!(),
                }
                Ok(p)
            })
            .collect()
    }

    /// Checks run settings and every point's mix parameters.
    pub fn validate(&self) -> Result<Vec<Point>, ConfigError> {
        if self.replications == 0 {
            return Err(ConfigError::Invalid("replications must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(ConfigError::Invalid("horizon must be at least 1 arrival".into()));
        }
        if !(0.0..1.0).contains(&self.warmup) {
            return Err(ConfigError::Invalid(format!("warmup must lie in [0, 1), got {}", self.warmup)));
        }
        if self.m == 0 {
            return Err(ConfigError::Invalid("m must be at least 1".into()));
        }
        let points = self.points()?;
        for p in &points {
            match self.mix {
                MixKind::Batch => {
                    BatchMixParams::new(p.n, p.k, p.lambda)?;
                }
                MixKind::Sampling => {
                    SamplingMixParams::new(p.n, p.k, p.lambda, p.p_a)?;
                }
            }
        }
        Ok(points)
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s))
        .collect()
}

/// Parses a comma-separated list of numbers, for use as a clap value parser.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    parse_list("values", s).map_err(|e| e.to_string())
}
