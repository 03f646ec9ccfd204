//! Experiment driver for `mixq`: configuration, sweeps and CSV output.

pub mod args;
pub mod config;
pub mod experiments;
pub mod row;

pub use args::RunArgs;
pub use config::{AttackKind, ConfigError, ExperimentConfig, MixKind, Point, SweepAxis};
pub use experiments::{cmd_analytic, cmd_attack, cmd_compare, cmd_simulate, derive_seed, predict, summary};
pub use row::{read_rows, write_rows, ResultRow, RowError, RowStatus, HEADER};
