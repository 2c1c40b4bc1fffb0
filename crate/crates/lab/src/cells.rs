//! One `(n, replicate)` cell of an experiment and its CSV row.

use orbitmatch_core::diagnostics::sigma_bounds_check;
use orbitmatch_core::estimators::{
    correlation_integral, d2_estimate, h2_collision_estimate, log_r_grid, orbit_correlation_integral, Trim,
};
use orbitmatch_core::maps::OrbitBuffer;
use orbitmatch_core::matcher::{match_cell, return_set_measure, MatchOptions, ReturnMode};
use orbitmatch_core::proximity::{
    alpha_of, cell_orbit, proximity_cell, short_return_measure, CellFlag, ProximityOptions,
};
use orbitmatch_core::seed::cell_seed;
use orbitmatch_core::thermo::{renyi_entropy_exact, EntropyResult};
use orbitmatch_core::{maps, Error};
use serde::{Deserialize, Serialize};

use crate::config::{BuiltSystem, D2Mode, ExperimentConfig, Kind, MeasureSystem};

/// Fixed CSV header of `results.csv`.
pub const CSV_HEADER: [&str; 8] = ["experiment", "kind", "n", "replicate", "seed", "value", "aux", "flag"];

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub kind: String,
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub value: f64,
    pub aux: f64,
    pub flag: String,
}

impl Row {
    pub fn flag(&self) -> Option<CellFlag> {
        CellFlag::parse(&self.flag)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub n: usize,
    pub replicate: usize,
}

/// Per-run state shared by every cell.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: ExperimentConfig,
    pub system: BuiltSystem,
    /// Exact entropy for measure systems.
    pub entropy: Option<EntropyResult>,
}

impl Context {
    pub fn new(config: &ExperimentConfig) -> orbitmatch_core::Result<Self> {
        let system = config.system.build()?;
        let entropy = match &system {
            BuiltSystem::Measure(ms) if matches!(config.kind, Kind::MatchCurve | Kind::H2 | Kind::Diagnostics) => {
                Some(renyi_entropy_exact(&ms.measure)?)
            }
            _ => None,
        };
        Ok(Context { config: config.clone(), system, entropy })
    }

    /// Every cell in `(n, replicate)` order with its derived seed.
    pub fn cells(&self) -> Vec<(CellKey, u64)> {
        let c = &self.config;
        c.n_grid
            .iter()
            .flat_map(|&n| {
                (0..c.replicates).map(move |replicate| {
                    (CellKey { n, replicate }, cell_seed(c.master_seed, c.kind.tag(), n as u64, replicate as u64))
                })
            })
            .collect()
    }

    pub fn proximity_options(&self) -> ProximityOptions {
        let p = &self.config.params;
        ProximityOptions { exact_doubling: p.exact, window: p.window, dither: p.dither, max_resamples: p.max_resamples }
    }

    fn measure(&self) -> &MeasureSystem {
        match &self.system {
            BuiltSystem::Measure(m) => m,
            BuiltSystem::Map(_) => unreachable!("validated at parse time"),
        }
    }

    fn map(&self) -> &maps::MapSpec {
        match &self.system {
            BuiltSystem::Map(m) => m,
            BuiltSystem::Measure(_) => unreachable!("validated at parse time"),
        }
    }

    /// Computes one cell. The row depends only on the config and the key.
    pub fn compute(&self, key: CellKey, seed: u64) -> orbitmatch_core::Result<Row> {
        let cfg = &self.config;
        let p = &cfg.params;
        let CellKey { n, replicate } = key;
        let (value, aux, flag) = match cfg.kind {
            Kind::MatchCurve => {
                let ms = self.measure();
                let h2 = self.entropy.expect("entropy computed for match curves").h2;
                let opts = MatchOptions { buffer_factor: p.buffer_factor };
                let c = match_cell(&ms.measure, &ms.system, n, replicate, seed, h2, &opts)?;
                (c.ratio, c.m_n as f64, CellFlag::Ok)
            }
            Kind::ProximityCurve => {
                let c = proximity_cell(self.map(), n, replicate, seed, p.variant, &self.proximity_options())?;
                (c.ratio, c.neg_log, c.flag)
            }
            Kind::D2 => {
                let grid = log_r_grid(p.r_max, p.decades, p.per_decade);
                let (curve, resamples) = match p.d2_mode {
                    D2Mode::Iid => (correlation_integral(&maps::sample_points(self.map(), n, seed)?, &grid)?, 0),
                    D2Mode::Orbit => {
                        let (orbit, resamples) = cell_orbit(self.map(), n, seed, &self.proximity_options())?;
                        (orbit_correlation_integral(&orbit.to_f64(), &grid, alpha_of(n))?, resamples)
                    }
                };
                let fit = d2_estimate(&curve, Trim::default())?;
                let flag = if curve.floor_flags.iter().any(|&f| f) {
                    CellFlag::Floor
                } else if resamples > 0 {
                    CellFlag::Resampled
                } else {
                    CellFlag::Ok
                };
                (fit.slope, fit.stderr, flag)
            }
            Kind::H2 => {
                let e = h2_collision_estimate(&self.measure().measure, p.block_len, n, seed)?;
                (e.h2, e.stderr, CellFlag::Ok)
            }
            Kind::Diagnostics => {
                let checks = sigma_bounds_check(&self.measure().measure, n, p.k_max)?;
                let worst = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
                let failed = checks.iter().filter(|c| !c.pass).count();
                (worst, failed as f64, CellFlag::Ok)
            }
            Kind::Returns => match &self.system {
                BuiltSystem::Measure(ms) => {
                    let mode = ReturnMode::Empirical { samples: p.samples, seed };
                    let est = return_set_measure(&ms.measure, p.return_len, n, mode)?;
                    let exact = return_set_measure(&ms.measure, p.return_len, n, ReturnMode::Exact)?;
                    (est.value, exact.value, CellFlag::Ok)
                }
                BuiltSystem::Map(map) => {
                    let est = short_return_measure(map, n, p.eps, p.samples, seed)?;
                    let flag = if est.resampled > 0 { CellFlag::Resampled } else { CellFlag::Ok };
                    (est.estimate / p.eps, est.stderr / p.eps, flag)
                }
            },
        };
        Ok(Row {
            experiment: cfg.name.clone(),
            kind: cfg.kind.name().to_string(),
            n,
            replicate,
            seed,
            value,
            aux,
            flag: flag.name().to_string(),
        })
    }

    /// The orbit behind a proximity cell, regenerated from its seed.
    pub fn orbit(&self, key: CellKey, seed: u64) -> orbitmatch_core::Result<OrbitBuffer> {
        if self.config.kind != Kind::ProximityCurve {
            return Err(Error::InvalidArgument("orbits exist only for proximity curves".into()));
        }
        Ok(cell_orbit(self.map(), key.n, seed, &self.proximity_options())?.0)
    }
}
