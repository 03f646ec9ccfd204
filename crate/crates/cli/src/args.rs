//! Command-line arguments shared by every command.

use std::path::{Path, PathBuf};

use clap::Args;

use crate::config::{AttackKind, ConfigError, ExperimentConfig, MixKind, SweepAxis};

/// Directory for output files when `--out` is not given.
pub const OUT_DIR_ENV: &str = "MIXQ_OUT_DIR";

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path [default: $MIXQ_OUT_DIR/<command>.csv, else ./<command>.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mix: Option<MixKind>,
    /// Number of senders.
    #[arg(long)]
    pub n: Option<usize>,
    /// Batch size (threshold or number of queues released).
    #[arg(long)]
    pub k: Option<usize>,
    /// Per-sender Poisson rate.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Sampling mix: probability the arriving message's queue is released.
    #[arg(long = "p-a", alias = "p_a")]
    pub p_a: Option<f64>,
    /// Receivers per sender.
    #[arg(long)]
    pub m: Option<usize>,
    /// Arrivals per replication.
    #[arg(long)]
    pub horizon: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub replications: Option<usize>,
    /// Leading fraction of each run excluded from statistics.
    #[arg(long)]
    pub warmup: Option<f64>,
    #[arg(long, value_enum)]
    pub sweep: Option<SweepAxis>,
    /// Comma-separated values of the swept parameter.
    #[arg(long)]
    pub values: Option<String>,
    #[arg(long, value_enum)]
    pub attack: Option<AttackKind>,
}

impl RunArgs {
    /// The configuration file (or defaults) with flags applied on top.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! apply {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f.clone() {
                    cfg.$f = v;
                }
            )*};
        }
        apply!(mix, n, k, lambda, p_a, m, horizon, seed, replications, warmup, sweep, attack);
        if let Some(v) = &self.values {
            cfg.set("values", v)?;
        }
        Ok(cfg)
    }

    pub fn out_path(&self, command: &str) -> PathBuf {
        out_path(self.out.as_deref(), std::env::var_os(OUT_DIR_ENV).as_deref().map(Path::new), command)
    }
}

fn out_path(out: Option<&Path>, dir: Option<&Path>, command: &str) -> PathBuf {
    match (out, dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => d.join(format!("{command}.csv")),
        (None, None) => PathBuf::from(format!("{command}.csv")),
    }
}
