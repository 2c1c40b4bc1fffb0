//! Record files, fits against theoretical targets and verification.

use std::fs;
use std::path::{Path, PathBuf};

use orbitmatch_core::estimators::{exponent_fit, CurvePoint, FitOptions};
use orbitmatch_core::proximity::CellFlag;
use serde::{Deserialize, Serialize};

use crate::cells::{CellKey, Context, Row, CSV_HEADER};
use crate::config::{BuiltSystem, ExperimentConfig, Kind};
use crate::error::{LabError, Result};

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";

/// Records with more than this fraction of cells missing are refused.
pub const MAX_MISSING_FRACTION: f64 = 0.5;

pub fn code_version() -> String {
    format!("orbitmatch {}", env!("CARGO_PKG_VERSION"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestCell {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
}

/// Config echo, code version and every derived seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub kind: String,
    pub code_version: String,
    pub config_digest: String,
    pub config: String,
    pub master_seed: u64,
    pub seed_derivation: String,
    pub cells: Vec<ManifestCell>,
}

impl Manifest {
    pub fn new(ctx: &Context) -> Self {
        let cfg = &ctx.config;
        Manifest {
            experiment: cfg.name.clone(),
            kind: cfg.kind.name().to_string(),
            code_version: code_version(),
            config_digest: cfg.digest(),
            config: cfg.canonical_text(),
            master_seed: cfg.master_seed,
            seed_derivation: format!("splitmix64 fold of (master_seed, kind tag {}, n, replicate)", cfg.kind.tag()),
            cells: ctx
                .cells()
                .into_iter()
                .map(|(k, seed)| ManifestCell { n: k.n, replicate: k.replicate, seed })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Incomplete,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 1,
            Status::Incomplete => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMean {
    pub n: usize,
    pub mean: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r_squared: f64,
    pub point_count: usize,
    pub excluded: usize,
    pub total: usize,
    pub means: Vec<GridMean>,
}

/// Statistic of a record compared with its target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub statistic: String,
    pub value: Option<f64>,
    pub target: f64,
    pub target_source: String,
    pub tolerance: f64,
    pub pass: bool,
    pub fit: Option<FitReport>,
    /// Replicates at the largest `n` whose single-point ratio lies within
    /// tolerance of the target, out of those present (curve kinds only).
    pub largest_n_within: Option<[usize; 2]>,
    pub note: Option<String>,
}

pub fn within_tolerance(value: f64, target: f64, tolerance: f64) -> bool {
    (value - target).abs() <= tolerance
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Rows at the largest `n` present.
fn largest_n_rows(rows: &[Row]) -> Vec<&Row> {
    let top = rows.iter().map(|r| r.n).max().unwrap_or(0);
    rows.iter().filter(|r| r.n == top).collect()
}

/// Compares the rows of a record with the kind's target.
pub fn evaluate(ctx: &Context, rows: &[Row], tolerance: f64) -> Evaluation {
    let cfg = &ctx.config;
    let mut ev = Evaluation {
        statistic: String::new(),
        value: None,
        target: 0.0,
        target_source: String::new(),
        tolerance,
        pass: false,
        fit: None,
        largest_n_within: None,
        note: None,
    };
    if rows.is_empty() {
        ev.note = Some("no rows".into());
        return ev;
    }
    match cfg.kind {
        Kind::MatchCurve | Kind::ProximityCurve => {
            if cfg.kind == Kind::MatchCurve {
                let e = ctx.entropy.expect("entropy computed for match curves");
                ev.statistic = "slope of M_n against ln n".into();
                ev.target = 2.0 / e.h2;
                ev.target_source = format!("2/H_2 with H_2 = {} from renyi_entropy_exact ({:?})", e.h2, e.method);
            } else {
                ev.statistic = "slope of -ln m_n against ln n, floor-flagged cells excluded".into();
                ev.target = 2.0;
                ev.target_source =
                    "2/D_2 with D_2 = 1: the invariant measure has a density bounded away from 0 and infinity".into();
            }
            let table: Vec<CurvePoint> = rows
                .iter()
                .map(|r| CurvePoint { n: r.n, value: r.aux, flagged: r.flag() == Some(CellFlag::Floor) })
                .collect();
            let top = largest_n_rows(rows);
            let usable: Vec<&&Row> = top.iter().filter(|r| r.flag() != Some(CellFlag::Floor)).collect();
            let hits = usable.iter().filter(|r| within_tolerance(r.value, ev.target, tolerance)).count();
            ev.largest_n_within = Some([hits, usable.len()]);
            match exponent_fit(&table, FitOptions::default()) {
                Ok(f) => {
                    ev.value = Some(f.fit.slope);
                    ev.pass = within_tolerance(f.fit.slope, ev.target, tolerance);
                    ev.fit = Some(FitReport {
                        slope: f.fit.slope,
                        intercept: f.fit.intercept,
                        stderr: f.fit.stderr,
                        r_squared: f.fit.r_squared,
                        point_count: f.fit.point_count,
                        excluded: f.excluded,
                        total: f.total,
                        means: f.means.iter().map(|&(n, mean, replicates)| GridMean { n, mean, replicates }).collect(),
                    });
                }
                Err(e) => ev.note = Some(format!("fit refused: {e}")),
            }
        }
        Kind::D2 | Kind::H2 => {
            let top = largest_n_rows(rows);
            let vals: Vec<f64> = top.iter().map(|r| r.value).filter(|v| v.is_finite()).collect();
            if cfg.kind == Kind::D2 {
                ev.statistic = "mean correlation-dimension slope at the largest n".into();
                ev.target = 1.0;
                ev.target_source = "D_2 = 1 for a measure with bounded density".into();
            } else {
                let e = ctx.entropy.expect("entropy computed for h2");
                ev.statistic = "mean collision estimate of H_2 at the largest n".into();
                ev.target = e.h2;
                ev.target_source = format!("renyi_entropy_exact ({:?})", e.method);
            }
            if vals.is_empty() {
                ev.note = Some("no finite values at the largest n".into());
            } else {
                let m = mean(&vals);
                ev.value = Some(m);
                ev.pass = within_tolerance(m, ev.target, tolerance);
            }
        }
        Kind::Diagnostics => {
            ev.statistic = "number of failed bound checks".into();
            ev.target = 0.0;
            ev.target_source = "every exact bound must hold".into();
            let failed: f64 = rows.iter().map(|r| r.aux).sum();
            ev.value = Some(failed);
            ev.pass = failed == 0.0;
        }
        Kind::Returns => match &ctx.system {
            BuiltSystem::Measure(_) => {
                ev.statistic = "largest |empirical - exact| return-set measure".into();
                ev.target = 0.0;
                ev.target_source = "exact Markov return-set mass".into();
                let worst = rows.iter().map(|r| (r.value - r.aux).abs()).fold(0.0, f64::max);
                ev.value = Some(worst);
                ev.pass = worst <= tolerance;
            }
            BuiltSystem::Map(_) => {
                let (lo, hi) = cfg.params.band;
                ev.statistic = format!("largest distance of mu(E_n(eps))/eps outside [{lo}, {hi}]");
                ev.target = 0.0;
                ev.target_source = "short-return measure is of order eps".into();
                let worst = rows
                    .iter()
                    .map(|r| if r.value.is_nan() { f64::INFINITY } else { (lo - r.value).max(r.value - hi).max(0.0) })
                    .fold(0.0, f64::max);
                ev.value = Some(worst);
                ev.pass = worst <= tolerance;
            }
        },
    }
    ev
}

/// `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub kind: String,
    pub code_version: String,
    pub config_digest: String,
    pub status: Status,
    pub cells_total: usize,
    pub cells_present: usize,
    pub cell_errors: Vec<CellError>,
    pub evaluation: Evaluation,
    pub wall_time_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellError {
    pub n: usize,
    pub replicate: usize,
    pub error: String,
}

/// Builds a report from the rows present; a record missing more than half
/// of its cells is incomplete and not evaluated against the target.
pub fn build_report(ctx: &Context, rows: &[Row], tolerance: f64, cell_errors: Vec<CellError>) -> Report {
    let total = ctx.config.cell_count();
    let present = rows.len();
    let evaluation = evaluate(ctx, rows, tolerance);
    let status = if (total - present) as f64 > MAX_MISSING_FRACTION * total as f64 {
        Status::Incomplete
    } else if evaluation.pass {
        Status::Pass
    } else {
        Status::Fail
    };
    Report {
        experiment: ctx.config.name.clone(),
        kind: ctx.config.kind.name().to_string(),
        code_version: code_version(),
        config_digest: ctx.config.digest(),
        status,
        cells_total: total,
        cells_present: present,
        cell_errors,
        evaluation,
        wall_time_secs: None,
    }
}

pub fn write_rows(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(LabError::csv(path))?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER).map_err(LabError::csv(path))?;
    }
    for r in rows {
        w.serialize(r).map_err(LabError::csv(path))?;
    }
    w.flush().map_err(LabError::io(path))
}

pub fn read_rows(path: &Path) -> Result<Vec<Row>> {
    let mut r = csv::Reader::from_path(path).map_err(LabError::csv(path))?;
    let header = r.headers().map_err(LabError::csv(path))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(LabError::Record { path: path.into(), message: format!("unexpected header {header:?}") });
    }
    r.deserialize().collect::<Result<Vec<Row>, _>>().map_err(LabError::csv(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(LabError::json(path))?;
    text.push('\n');
    fs::write(path, text).map_err(LabError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(LabError::io(path))?;
    serde_json::from_str(&text).map_err(LabError::json(path))
}

/// Outcome of re-checking a record on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub record: PathBuf,
    pub report: Report,
}

/// Re-evaluates a record from `manifest.json` and `results.csv` alone.
/// Rows whose seed disagrees with the manifest make the record invalid.
pub fn verify(record: &Path, tolerance: Option<f64>) -> Result<Verdict> {
    let manifest_path = record.join(MANIFEST_FILE);
    let manifest: Manifest = read_json(&manifest_path)?;
    let config = ExperimentConfig::parse(&manifest.config)?;
    if config.digest() != manifest.config_digest {
        return Err(LabError::Record { path: manifest_path, message: "config digest does not match the echo".into() });
    }
    let ctx = Context::new(&config)?;
    let results_path = record.join(RESULTS_FILE);
    let rows = if results_path.exists() { read_rows(&results_path)? } else { Vec::new() };
    let expected: std::collections::BTreeMap<CellKey, u64> = ctx.cells().into_iter().collect();
    for r in &rows {
        let key = CellKey { n: r.n, replicate: r.replicate };
        if expected.get(&key) != Some(&r.seed) || r.experiment != config.name || r.kind != config.kind.name() {
            return Err(LabError::Record {
                path: results_path,
                message: format!("row (n = {}, replicate = {}) does not belong to this config", r.n, r.replicate),
            });
        }
    }
    let tolerance = tolerance.unwrap_or(config.params.tolerance);
    let report = build_report(&ctx, &rows, tolerance, Vec::new());
    Ok(Verdict { record: record.into(), report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_comparison() {
        assert!(within_tolerance(2.9, 2.8854, 0.35));
        assert!(!within_tolerance(2.0, 2.8854, 0.35));
        assert!(within_tolerance(1.0, 1.5, 0.5));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(Status::Pass.exit_code(), 0);
        assert_eq!(Status::Fail.exit_code(), 1);
        assert_eq!(Status::Incomplete.exit_code(), 3);
    }
}
