//! Parallel cell execution with per-cell files and a deterministic merge.
//!
//! Each finished cell is written to `cells/<digest>/n<n>_r<replicate>.csv`
//! through a temporary file and a rename, so an interrupted run leaves only
//! complete cells behind. A rerun reuses every cell file whose row matches
//! its key and seed, then merges all cells in `(n, replicate)` order on one
//! thread.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use orbitmatch_core::diagnostics::{psi_decay_check, quasi_bernoulli_junction, sigma_bounds_check};
use orbitmatch_core::maps::{MapSpec, OrbitBuffer};
use orbitmatch_core::proximity::NOISE_FLOOR_MULTIPLIER;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::cells::{CellKey, Context, Row};
use crate::config::{BuiltSystem, ExperimentConfig, Kind};
use crate::error::{LabError, Result};
use crate::record::{
    build_report, read_rows, write_json, write_rows, CellError, Manifest, Report, DIAGNOSTICS_FILE, MANIFEST_FILE,
    REPORT_FILE, RESULTS_FILE,
};

/// Worker count; the only environment input.
pub const WORKERS_ENV: &str = "ORBITMATCH_WORKERS";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Defaults to rayon's choice.
    pub workers: Option<usize>,
    /// Compute at most this many missing cells, leaving the rest for a
    /// later run.
    pub max_new_cells: Option<usize>,
}

impl RunOptions {
    pub fn from_env() -> std::result::Result<Self, String> {
        let workers = match std::env::var(WORKERS_ENV) {
            Err(_) => None,
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) if w >= 1 => Some(w),
                _ => return Err(format!("{WORKERS_ENV} must be a positive integer, got `{v}`")),
            },
        };
        Ok(RunOptions { workers, max_new_cells: None })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub record: PathBuf,
    pub report: Report,
    pub computed: usize,
    pub reused: usize,
}

pub fn cell_dir(out: &Path, config: &ExperimentConfig) -> PathBuf {
    out.join("cells").join(&config.digest()[..16])
}

pub fn cell_path(dir: &Path, key: CellKey) -> PathBuf {
    dir.join(format!("n{:012}_r{:05}.csv", key.n, key.replicate))
}

fn orbit_path(out: &Path, key: CellKey) -> PathBuf {
    out.join("orbits").join(format!("n{:012}_r{:05}.csv", key.n, key.replicate))
}

/// A cell file is reused only if it holds exactly the row for its key.
fn load_cell(path: &Path, key: CellKey, seed: u64) -> Option<Row> {
    let rows = read_rows(path).ok()?;
    match rows.as_slice() {
        [r] if r.n == key.n && r.replicate == key.replicate && r.seed == seed => Some(r.clone()),
        _ => None,
    }
}

fn store_cell(path: &Path, row: &Row) -> Result<()> {
    let tmp = path.with_extension("csv.tmp");
    write_rows(&tmp, std::slice::from_ref(row))?;
    fs::rename(&tmp, path).map_err(LabError::io(path))
}

/// Writes `index,point,noise_floor` for every orbit point.
pub fn write_orbit_csv(path: &Path, orbit: &OrbitBuffer) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(LabError::csv(path))?;
    w.write_record(["index", "point", "noise_floor"]).map_err(LabError::csv(path))?;
    for i in 0..orbit.len() {
        w.serialize((i, orbit.point(i), orbit.noise_floor(i))).map_err(LabError::csv(path))?;
    }
    w.flush().map_err(LabError::io(path))
}

fn export_orbit(ctx: &Context, out: &Path, key: CellKey, seed: u64) -> Result<()> {
    let path = orbit_path(out, key);
    if path.exists() {
        return Ok(());
    }
    let tmp = path.with_extension("csv.tmp");
    write_orbit_csv(&tmp, &ctx.orbit(key, seed)?)?;
    fs::rename(&tmp, &path).map_err(LabError::io(&path))
}

enum CellResult {
    Done(Row),
    Failed(CellError),
}

/// Runs (or resumes) an experiment into `out`.
pub fn run(config: &ExperimentConfig, out: &Path, opts: &RunOptions) -> Result<RunOutcome> {
    let start = Instant::now();
    let ctx = Context::new(config)?;
    let dir = cell_dir(out, config);
    fs::create_dir_all(&dir).map_err(LabError::io(&dir))?;
    let export = config.kind == Kind::ProximityCurve && config.params.export_orbits;
    if export {
        let orbits = out.join("orbits");
        fs::create_dir_all(&orbits).map_err(LabError::io(&orbits))?;
    }

    let cells = ctx.cells();
    let mut reused = Vec::new();
    let mut pending = Vec::new();
    for &(key, seed) in &cells {
        match load_cell(&cell_path(&dir, key), key, seed) {
            Some(row) => reused.push(row),
            None => pending.push((key, seed)),
        }
    }
    if let Some(limit) = opts.max_new_cells {
        pending.truncate(limit);
    }

    let work = |&(key, seed): &(CellKey, u64)| -> Result<CellResult> {
        match ctx.compute(key, seed) {
            Ok(row) => {
                store_cell(&cell_path(&dir, key), &row)?;
                if export {
                    export_orbit(&ctx, out, key, seed)?;
                }
                Ok(CellResult::Done(row))
            }
            Err(e) => Ok(CellResult::Failed(CellError { n: key.n, replicate: key.replicate, error: e.to_string() })),
        }
    };
    let results: Vec<Result<CellResult>> = match opts.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| LabError::Record { path: out.into(), message: format!("thread pool: {e}") })?
            .install(|| pending.par_iter().map(work).collect()),
        None => pending.par_iter().map(work).collect(),
    };

    let mut rows = reused;
    let reused_count = rows.len();
    let mut errors = Vec::new();
    for r in results {
        match r? {
            CellResult::Done(row) => rows.push(row),
            CellResult::Failed(e) => errors.push(e),
        }
    }
    if export {
        for row in &rows[..reused_count] {
            export_orbit(&ctx, out, CellKey { n: row.n, replicate: row.replicate }, row.seed)?;
        }
    }
    let computed = rows.len() - reused_count;
    rows.sort_by_key(|r| (r.n, r.replicate));

    write_rows(&out.join(RESULTS_FILE), &rows)?;
    write_json(&out.join(MANIFEST_FILE), &Manifest::new(&ctx))?;
    write_json(&out.join(DIAGNOSTICS_FILE), &diagnostics(&ctx, &rows, &errors))?;
    let mut report = build_report(&ctx, &rows, config.params.tolerance, errors);
    report.wall_time_secs = Some(start.elapsed().as_secs_f64());
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(RunOutcome { record: out.into(), report, computed, reused: reused_count })
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(x.to_string())
    }
}

/// Side information: flag counts, failures and kind-specific exact checks.
fn diagnostics(ctx: &Context, rows: &[Row], errors: &[CellError]) -> Value {
    let count = |f: &str| rows.iter().filter(|r| r.flag == f).count();
    let mut d = json!({
        "flags": { "ok": count("ok"), "floor": count("floor"), "resampled": count("resampled") },
        "cell_errors": errors.len(),
    });
    let p = &ctx.config.params;
    match &ctx.system {
        BuiltSystem::Measure(ms) => {
            if let Some(e) = ctx.entropy {
                d["entropy"] = json!({
                    "h2": e.h2,
                    "method": format!("{:?}", e.method),
                    "cross_check": e.cross_check.map(|(m, v)| json!({ "method": format!("{m:?}"), "h2": v })),
                });
            }
            if ctx.config.kind == Kind::Diagnostics {
                let m = &ms.measure;
                let mut per_r = Vec::new();
                for &r in &ctx.config.n_grid {
                    let checks = match sigma_bounds_check(m, r, p.k_max) {
                        Ok(cs) => cs
                            .iter()
                            .map(|c| {
                                json!({
                                    "name": c.name, "lhs": finite(c.lhs), "rhs": finite(c.rhs),
                                    "margin": finite(c.margin), "pass": c.pass,
                                })
                            })
                            .collect(),
                        Err(e) => vec![json!({ "error": e.to_string() })],
                    };
                    per_r.push(json!({ "r": r, "checks": checks }));
                }
                d["sigma_bounds"] = json!(per_r);
                d["quasi_bernoulli_junction"] = finite(quasi_bernoulli_junction(m));
                d["psi_decay"] = match psi_decay_check(m, p.k_max) {
                    Ok(c) => json!({ "name": c.name, "lhs": finite(c.lhs), "rhs": finite(c.rhs), "pass": c.pass }),
                    Err(e) => json!({ "error": e.to_string() }),
                };
            }
        }
        BuiltSystem::Map(map) => {
            let exact = matches!(map, MapSpec::KDoubling { .. }) && p.exact;
            d["map"] = json!({
                "name": map.name(),
                "arithmetic": if exact { "exact digit windows" } else { "floating, dithered" },
            });
            if let MapSpec::PiecewiseAffine(b) = map {
                d["map"]["branches"] = json!(b.branch_count());
                d["map"]["tail_mass"] = json!(b.tail_mass());
            }
            if ctx.config.kind == Kind::ProximityCurve {
                d["noise_floor_multiplier"] = json!(NOISE_FLOOR_MULTIPLIER);
            }
        }
    }
    d
}
