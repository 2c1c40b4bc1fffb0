//! Reproducible experiment runner for orbit recurrence statistics.
//!
//! An experiment is a config file naming a kind, a system and a grid of
//! `(n, replicate)` cells. Every cell draws from a seed derived from
//! `(master_seed, kind, n, replicate)`, so results do not depend on worker
//! count or execution order. A run writes `results.csv`, `manifest.json`,
//! `report.json` and `diagnostics.json` into its output directory.

pub mod cells;
pub mod config;
pub mod error;
pub mod record;
pub mod runner;

pub use cells::{CellKey, Context, Row};
pub use config::{ExperimentConfig, Kind};
pub use error::{ConfigError, LabError};
pub use record::{verify, Report, Status};
pub use runner::{run, RunOptions, RunOutcome};

/// The shipped example config for `kind`.
pub fn example_config(kind: Kind) -> &'static str {
    match kind {
        Kind::MatchCurve => include_str!("../configs/match_curve.cfg"),
        Kind::ProximityCurve => include_str!("../configs/proximity_curve.cfg"),
        Kind::D2 => include_str!("../configs/d2.cfg"),
        Kind::H2 => include_str!("../configs/h2.cfg"),
        Kind::Diagnostics => include_str!("../configs/diagnostics.cfg"),
        Kind::Returns => include_str!("../configs/returns.cfg"),
    }
}
