//! Experiment configuration: a plain-text document of `[section]` headers
//! and `key = value` lines. `#` starts a comment. Lists are comma
//! separated; matrices are `;`-separated rows of comma-separated decimals,
//! where `-inf` marks a forbidden transition in a potential.
//!
//! ```text
//! [experiment]
//! name = uniform_shift
//! kind = match_curve
//! master_seed = 7
//! replicates = 5
//! n_grid = 1e3, 1e4, 1e5
//!
//! [system]
//! type = bernoulli
//! weights = 0.5, 0.5
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use orbitmatch_core::linalg::Matrix;
use orbitmatch_core::maps::{AffineBranches, MapSpec, DEFAULT_AFFINE_BRANCHES};
use orbitmatch_core::proximity::Variant;
use orbitmatch_core::seed::tag;
use orbitmatch_core::symbolic::{MeasureSpec, TransitionSystem};
use sha2::{Digest, Sha256};

use crate::error::ConfigError;

/// Experiment kinds understood by the runner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    MatchCurve,
    ProximityCurve,
    D2,
    H2,
    Diagnostics,
    Returns,
}

impl Kind {
    pub const ALL: [Kind; 6] =
        [Kind::MatchCurve, Kind::ProximityCurve, Kind::D2, Kind::H2, Kind::Diagnostics, Kind::Returns];

    pub fn name(self) -> &'static str {
        match self {
            Kind::MatchCurve => "match_curve",
            Kind::ProximityCurve => "proximity_curve",
            Kind::D2 => "d2",
            Kind::H2 => "h2",
            Kind::Diagnostics => "diagnostics",
            Kind::Returns => "returns",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Kind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            Kind::MatchCurve => "longest self-match M_n of a sampled sequence; slope of M_n vs ln n against 2/H_2",
            Kind::ProximityCurve => "closest-iterate distance m_n of a map orbit; slope of -ln m_n vs ln n against 2",
            Kind::D2 => "correlation dimension of an invariant measure from n sampled points; against 1",
            Kind::H2 => "collision estimate of the Renyi entropy from n sampled blocks; against the exact H_2",
            Kind::Diagnostics => "exact overlap-bound, psi-decay and quasi-Bernoulli checks for block length n",
            Kind::Returns => "return-set measures: mu(S_n(r)) for a measure, mu(E_n(eps))/eps for a map",
        }
    }

    /// Seed stream tag.
    pub fn tag(self) -> u64 {
        match self {
            Kind::MatchCurve => tag::MATCH,
            Kind::ProximityCurve => tag::PROXIMITY,
            Kind::D2 => tag::D2,
            Kind::H2 => tag::H2,
            Kind::Diagnostics => tag::DIAGNOSTICS,
            Kind::Returns => tag::RETURNS,
        }
    }

    /// Meaning of `n` in the grid.
    pub fn grid_meaning(self) -> &'static str {
        match self {
            Kind::MatchCurve => "sequence length",
            Kind::ProximityCurve => "orbit length",
            Kind::D2 => "number of points",
            Kind::H2 => "number of sampled blocks",
            Kind::Diagnostics => "block length r",
            Kind::Returns => "lag or iterate n",
        }
    }

    fn default_tolerance(self) -> f64 {
        match self {
            Kind::MatchCurve => 0.35,
            Kind::ProximityCurve => 0.5,
            Kind::D2 => 0.1,
            Kind::H2 => 0.03,
            Kind::Diagnostics => 0.0,
            Kind::Returns => 0.01,
        }
    }

    fn allowed_params(self) -> &'static [&'static str] {
        match self {
            Kind::MatchCurve => &["tolerance", "buffer_factor"],
            Kind::ProximityCurve => {
                &["tolerance", "variant", "exact", "window", "dither", "max_resamples", "export_orbits"]
            }
            Kind::D2 => &["tolerance", "mode", "r_max", "decades", "per_decade", "dither", "max_resamples"],
            Kind::H2 => &["tolerance", "block_len"],
            Kind::Diagnostics => &["k_max"],
            Kind::Returns => &["tolerance", "r", "samples", "eps", "band"],
        }
    }

    fn needs_measure(self) -> Option<bool> {
        match self {
            Kind::MatchCurve | Kind::H2 | Kind::Diagnostics => Some(true),
            Kind::ProximityCurve | Kind::D2 => Some(false),
            Kind::Returns => None,
        }
    }
}

/// The system under study, kept as plain data so it can be echoed.
#[derive(Debug, Clone, PartialEq)]
pub enum SystemConfig {
    Bernoulli { weights: Vec<f64> },
    Markov { transition: Vec<Vec<f64>> },
    UniformEdges { adjacency: Vec<Vec<f64>> },
    Gibbs2 { adjacency: Vec<Vec<f64>>, potential: Vec<Vec<f64>> },
    KDoubling { k: u32 },
    Affine { breakpoints: Option<Vec<f64>>, branches: usize },
    Gauss,
    MpInduced { a: f64 },
}

/// A symbolic system ready for sampling.
#[derive(Debug, Clone)]
pub struct MeasureSystem {
    pub measure: MeasureSpec,
    pub system: TransitionSystem,
}

/// Either side of a built system.
#[derive(Debug, Clone)]
pub enum BuiltSystem {
    Measure(MeasureSystem),
    Map(MapSpec),
}

impl SystemConfig {
    pub fn is_measure(&self) -> bool {
        matches!(
            self,
            SystemConfig::Bernoulli { .. }
                | SystemConfig::Markov { .. }
                | SystemConfig::UniformEdges { .. }
                | SystemConfig::Gibbs2 { .. }
        )
    }

    pub fn build(&self) -> orbitmatch_core::Result<BuiltSystem> {
        let measure =
            |m: MeasureSpec, ts: TransitionSystem| BuiltSystem::Measure(MeasureSystem { measure: m, system: ts });
        Ok(match self {
            SystemConfig::Bernoulli { weights } => {
                measure(MeasureSpec::bernoulli(weights.clone())?, TransitionSystem::full(weights.len())?)
            }
            SystemConfig::Markov { transition } => {
                let p = Matrix::from_rows(transition)?;
                let ts = TransitionSystem::from_support(&p)?;
                measure(MeasureSpec::markov_from_transition(p)?, ts)
            }
            SystemConfig::UniformEdges { adjacency } => {
                let ts = TransitionSystem::from_rows(adjacency)?;
                measure(MeasureSpec::uniform_edges(&ts)?, ts)
            }
            SystemConfig::Gibbs2 { adjacency, potential } => {
                let ts = TransitionSystem::from_rows(adjacency)?;
                measure(MeasureSpec::gibbs2(&ts, &Matrix::from_rows(potential)?)?, ts)
            }
            SystemConfig::KDoubling { k } => BuiltSystem::Map(MapSpec::k_doubling(*k)?),
            SystemConfig::Affine { breakpoints: Some(b), .. } => {
                BuiltSystem::Map(MapSpec::PiecewiseAffine(AffineBranches::new(b.clone())?))
            }
            SystemConfig::Affine { breakpoints: None, branches } => {
                BuiltSystem::Map(MapSpec::PiecewiseAffine(AffineBranches::geometric(*branches)?))
            }
            SystemConfig::Gauss => BuiltSystem::Map(MapSpec::Gauss),
            SystemConfig::MpInduced { a } => BuiltSystem::Map(MapSpec::mp_induced(*a)?),
        })
    }
}

/// How `d2` obtains its points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum D2Mode {
    /// Independent draws from the invariant measure.
    Iid,
    /// One orbit, pairs closer than `alpha_of(n)` in time skipped.
    Orbit,
}

/// Kind-specific parameters, defaulted where absent.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub tolerance: f64,
    pub buffer_factor: f64,
    pub variant: Variant,
    pub exact: bool,
    pub window: Option<u32>,
    pub dither: bool,
    pub max_resamples: u32,
    pub export_orbits: bool,
    pub d2_mode: D2Mode,
    pub r_max: f64,
    pub decades: u32,
    pub per_decade: u32,
    pub block_len: usize,
    pub k_max: usize,
    pub return_len: usize,
    pub samples: usize,
    pub eps: f64,
    pub band: (f64, f64),
}

impl Params {
    fn defaults(kind: Kind) -> Self {
        Params {
            tolerance: kind.default_tolerance(),
            buffer_factor: 8.0,
            variant: Variant::All,
            exact: true,
            window: None,
            dither: true,
            max_resamples: 32,
            export_orbits: false,
            d2_mode: D2Mode::Iid,
            r_max: 0.1,
            decades: 3,
            per_decade: 24,
            block_len: 10,
            k_max: 12,
            return_len: 4,
            samples: 100_000,
            eps: 1e-3,
            band: (1.0, 3.0),
        }
    }
}

/// A parsed and validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub kind: Kind,
    pub master_seed: u64,
    pub replicates: usize,
    pub n_grid: Vec<usize>,
    /// Not part of the canonical form: a record may be moved.
    pub output: Option<PathBuf>,
    pub system: SystemConfig,
    pub params: Params,
    entries: BTreeMap<String, BTreeMap<String, String>>,
}

const SECTIONS: [&str; 3] = ["experiment", "system", "params"];

struct Entry {
    line: usize,
    value: String,
}

struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, Entry>,
    used: Vec<String>,
}

impl<'a> Section<'a> {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        let e = self.entries.get(key)?;
        self.used.push(key.to_string());
        Some((e.line, e.value.clone()))
    }

    fn require(&mut self, key: &str) -> Result<(usize, String), ConfigError> {
        self.take(key).ok_or_else(|| ConfigError::Missing { section: self.name.to_string(), field: key.to_string() })
    }

    fn parse<T>(&mut self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => f(&v).map(Some).map_err(|message| field_err(line, key, message)),
        }
    }

    fn parse_required<T>(&mut self, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<T, ConfigError> {
        let (line, v) = self.require(key)?;
        f(&v).map_err(|message| field_err(line, key, message))
    }

    fn line_of(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.line)
    }

    fn reject_unused(&self, allowed_hint: &str) -> Result<(), ConfigError> {
        for (k, e) in &self.entries {
            if !self.used.contains(k) {
                return Err(field_err(e.line, k, format!("unknown key in [{}]{allowed_hint}", self.name)));
            }
        }
        Ok(())
    }
}

fn field_err(line: usize, field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field { line, field: field.to_string(), message: message.into() }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    match s.trim() {
        "-inf" => Ok(f64::NEG_INFINITY),
        t => match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format!("`{t}` is not a finite decimal")),
        },
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("-inf is only allowed in a potential".into())
    }
}

/// Integers, also written as `1e6` or `1_000_000`.
fn parse_count(s: &str) -> Result<usize, String> {
    let t: String = s.trim().chars().filter(|&c| c != '_').collect();
    if let Ok(v) = t.parse::<usize>() {
        return Ok(v);
    }
    match t.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1e15 => Ok(v as usize),
        _ => Err(format!("`{}` is not a non-negative integer", s.trim())),
    }
}

fn parse_u64(s: &str) -> Result<u64, String> {
    let t: String = s.trim().chars().filter(|&c| c != '_').collect();
    match t.strip_prefix("0x") {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse::<u64>(),
    }
    .map_err(|_| format!("`{}` is not a 64-bit unsigned integer", s.trim()))
}

fn parse_bool(s: &str) -> Result<bool, String> {
    match s.trim() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        t => Err(format!("`{t}` is not a boolean")),
    }
}

fn parse_list<T>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|i| i.is_empty()) {
        return Err("empty list entry".into());
    }
    items.into_iter().map(f).collect()
}

fn parse_matrix(s: &str, allow_neg_inf: bool) -> Result<Vec<Vec<f64>>, String> {
    let rows: Vec<Vec<f64>> = s
        .split(';')
        .enumerate()
        .map(|(i, row)| {
            parse_list(row, if allow_neg_inf { parse_f64 } else { parse_finite })
                .map_err(|e| format!("row {}: {e}", i + 1))
        })
        .collect::<Result<_, _>>()?;
    if let Some(bad) = rows.iter().position(|r| r.len() != rows.len()) {
        return Err(format!(
            "matrix is not square: {} rows, row {} has {} entries",
            rows.len(),
            bad + 1,
            rows[bad].len()
        ));
    }
    Ok(rows)
}

fn positive(v: f64) -> Result<f64, String> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be > 0"))
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<&str, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current: Option<&str> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(name) = body.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax { line, message: format!("malformed section header `{body}`") })?
                    .trim();
                let known = SECTIONS
                    .iter()
                    .find(|s| **s == name)
                    .ok_or_else(|| ConfigError::Syntax { line, message: format!("unknown section [{name}]") })?;
                if sections.contains_key(known) {
                    return Err(ConfigError::Syntax { line, message: format!("section [{name}] appears twice") });
                }
                sections.insert(known, BTreeMap::new());
                current = Some(known);
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax { line, message: "empty key or value".into() });
            }
            let section =
                current.ok_or_else(|| ConfigError::Syntax { line, message: "key before any section header".into() })?;
            let entries = sections.get_mut(section).expect("section inserted");
            if entries.contains_key(key) {
                return Err(field_err(line, key, "duplicate key"));
            }
            entries.insert(key.to_string(), Entry { line, value: value.to_string() });
        }
        let mut take =
            |name: &'static str| Section { name, entries: sections.remove(name).unwrap_or_default(), used: Vec::new() };
        let mut exp = take("experiment");
        let mut sys = take("system");
        let mut par = take("params");

        let name = exp.require("name")?.1;
        if !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
            return Err(field_err(exp.line_of("name"), "name", "use letters, digits, `_`, `-` or `.`"));
        }
        let kind = exp.parse_required("kind", |s| {
            Kind::parse(s).ok_or_else(|| {
                let names: Vec<&str> = Kind::ALL.iter().map(|k| k.name()).collect();
                format!("unknown kind `{s}`; expected one of {}", names.join(", "))
            })
        })?;
        let master_seed = exp.parse_required("master_seed", parse_u64)?;
        let replicates = exp.parse_required("replicates", |s| {
            parse_count(s).and_then(|r| if r >= 1 { Ok(r) } else { Err("replicates must be >= 1".into()) })
        })?;
        let n_grid = exp.parse_required("n_grid", |s| {
            let grid = parse_list(s, parse_count)?;
            if grid.windows(2).any(|w| w[0] >= w[1]) {
                return Err("n_grid must be strictly increasing".into());
            }
            if grid[0] == 0 {
                return Err("n_grid entries must be >= 1".into());
            }
            Ok(grid)
        })?;
        let output = exp.take("output").map(|(_, v)| PathBuf::from(v));
        exp.reject_unused("")?;

        let system = parse_system(&mut sys)?;
        sys.reject_unused("")?;
        match kind.needs_measure() {
            Some(true) if !system.is_measure() => {
                return Err(field_err(sys.line_of("type"), "type", format!("{} needs a measure system", kind.name())))
            }
            Some(false) if system.is_measure() => {
                return Err(field_err(sys.line_of("type"), "type", format!("{} needs a map system", kind.name())))
            }
            _ => {}
        }

        let params = parse_params(kind, &system, &mut par)?;
        let allowed = kind.allowed_params();
        par.reject_unused(&format!(" for {}; allowed: {}", kind.name(), allowed.join(", ")))?;

        let mut cfg = ExperimentConfig {
            name,
            kind,
            master_seed,
            replicates,
            n_grid,
            output,
            system,
            params,
            entries: BTreeMap::new(),
        };
        cfg.check_grid(&exp)?;
        for s in [&exp, &sys, &par] {
            let map: BTreeMap<String, String> = s
                .entries
                .iter()
                .filter(|(k, _)| !(s.name == "experiment" && k.as_str() == "output"))
                .map(|(k, e)| (k.clone(), e.value.clone()))
                .collect();
            cfg.entries.insert(s.name.to_string(), map);
        }
        Ok(cfg)
    }

    fn check_grid(&self, exp: &Section) -> Result<(), ConfigError> {
        let line = exp.line_of("n_grid");
        for &n in &self.n_grid {
            let need = match self.kind {
                Kind::MatchCurve | Kind::D2 => 2,
                Kind::ProximityCurve => self.params.variant.min_orbit_len(n),
                Kind::H2 => 1000,
                Kind::Diagnostics | Kind::Returns => 1,
            };
            if n < need {
                return Err(field_err(line, "n_grid", format!("{} needs n >= {need}, got {n}", self.kind.name())));
            }
        }
        Ok(())
    }

    /// Key-sorted form without comments or the output path. Equal canonical
    /// text means equal science.
    pub fn canonical_text(&self) -> String {
        let mut out = String::new();
        for name in SECTIONS {
            let Some(map) = self.entries.get(name) else { continue };
            if map.is_empty() {
                continue;
            }
            let _ = writeln!(out, "[{name}]");
            for (k, v) in map {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical_text().as_bytes()).iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    pub fn cell_count(&self) -> usize {
        self.n_grid.len() * self.replicates
    }
}

fn parse_system(sys: &mut Section) -> Result<SystemConfig, ConfigError> {
    let ty = sys.require("type")?.1;
    let system = match ty.as_str() {
        "bernoulli" => SystemConfig::Bernoulli { weights: sys.parse_required("weights", |s| parse_list(s, parse_finite))? },
        "markov" => SystemConfig::Markov { transition: sys.parse_required("transition", |s| parse_matrix(s, false))? },
        "uniform_edges" => {
            SystemConfig::UniformEdges { adjacency: sys.parse_required("adjacency", |s| parse_matrix(s, false))? }
        }
        "gibbs2" => SystemConfig::Gibbs2 {
            adjacency: sys.parse_required("adjacency", |s| parse_matrix(s, false))?,
            potential: sys.parse_required("potential", |s| parse_matrix(s, true))?,
        },
        "k_doubling" => SystemConfig::KDoubling {
            k: sys.parse_required("k", |s| {
                parse_count(s).and_then(|k| u32::try_from(k).map_err(|_| "k is too large".to_string()))
            })?,
        },
        "affine" => SystemConfig::Affine {
            breakpoints: sys.parse("breakpoints", |s| parse_list(s, parse_finite))?,
            branches: sys.parse("branches", parse_count)?.unwrap_or(DEFAULT_AFFINE_BRANCHES),
        },
        "gauss" => SystemConfig::Gauss,
        "mp_induced" => SystemConfig::MpInduced { a: sys.parse_required("a", parse_finite)? },
        other => {
            return Err(field_err(
                sys.line_of("type"),
                "type",
                format!(
                    "unknown system `{other}`; expected bernoulli, markov, uniform_edges, gibbs2, k_doubling, affine, gauss or mp_induced"
                ),
            ))
        }
    };
    // Surface construction errors (non-stochastic rows, bad breakpoints)
    // while the line is still known.
    system.build().map_err(|e| field_err(sys.line_of("type"), "type", e.to_string()))?;
    Ok(system)
}

fn parse_params(kind: Kind, system: &SystemConfig, par: &mut Section) -> Result<Params, ConfigError> {
    let mut p = Params::defaults(kind);
    if kind == Kind::Returns && system.is_measure() {
        p.samples = 200_000;
    }
    let allowed = kind.allowed_params();
    for key in par.entries.keys().cloned().collect::<Vec<_>>() {
        if !allowed.contains(&key.as_str()) {
            continue;
        }
        let (line, v) = par.take(&key).expect("key present");
        let err = |m: String| field_err(line, &key, m);
        match key.as_str() {
            "tolerance" => {
                p.tolerance = parse_finite(&v)
                    .and_then(|t| if t >= 0.0 { Ok(t) } else { Err("must be >= 0".into()) })
                    .map_err(err)?
            }
            "buffer_factor" => p.buffer_factor = parse_finite(&v).and_then(positive).map_err(err)?,
            "variant" => {
                p.variant = Variant::parse(&v)
                    .ok_or_else(|| err(format!("unknown variant `{v}`; expected all, near, far or split")))?
            }
            "exact" => p.exact = parse_bool(&v).map_err(err)?,
            "window" => {
                p.window =
                    Some(parse_count(&v).and_then(|w| u32::try_from(w).map_err(|_| "too large".into())).map_err(err)?)
            }
            "dither" => p.dither = parse_bool(&v).map_err(err)?,
            "max_resamples" => {
                p.max_resamples =
                    parse_count(&v).and_then(|w| u32::try_from(w).map_err(|_| "too large".into())).map_err(err)?
            }
            "export_orbits" => p.export_orbits = parse_bool(&v).map_err(err)?,
            "mode" => {
                p.d2_mode = match v.as_str() {
                    "iid" => D2Mode::Iid,
                    "orbit" => D2Mode::Orbit,
                    _ => return Err(err(format!("unknown mode `{v}`; expected iid or orbit"))),
                }
            }
            "r_max" => p.r_max = parse_finite(&v).and_then(positive).map_err(err)?,
            "decades" => {
                p.decades = parse_count(&v)
                    .and_then(|d| if (1..=12).contains(&d) { Ok(d as u32) } else { Err("must be in 1..=12".into()) })
                    .map_err(err)?
            }
            "per_decade" => {
                p.per_decade = parse_count(&v)
                    .and_then(
                        |d| if (1..=1000).contains(&d) { Ok(d as u32) } else { Err("must be in 1..=1000".into()) },
                    )
                    .map_err(err)?
            }
            "block_len" => {
                p.block_len = parse_count(&v)
                    .and_then(|b| if b >= 1 { Ok(b) } else { Err("must be >= 1".into()) })
                    .map_err(err)?
            }
            "k_max" => {
                p.k_max = parse_count(&v)
                    .and_then(|b| if b >= 1 { Ok(b) } else { Err("must be >= 1".into()) })
                    .map_err(err)?
            }
            "r" => {
                p.return_len = parse_count(&v)
                    .and_then(|b| if b >= 1 { Ok(b) } else { Err("must be >= 1".into()) })
                    .map_err(err)?
            }
            "samples" => {
                p.samples = parse_count(&v)
                    .and_then(|b| if b >= 1 { Ok(b) } else { Err("must be >= 1".into()) })
                    .map_err(err)?
            }
            "eps" => p.eps = parse_finite(&v).and_then(positive).map_err(err)?,
            "band" => {
                p.band = parse_list(&v, parse_finite)
                    .and_then(|b| match b[..] {
                        [lo, hi] if lo <= hi => Ok((lo, hi)),
                        _ => Err("expected `lo, hi` with lo <= hi".into()),
                    })
                    .map_err(err)?
            }
            _ => unreachable!("allowed key without a parser"),
        }
    }
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "[experiment]\nname = t\nkind = match_curve\nmaster_seed = 1\nreplicates = 2\nn_grid = 100, 1e3\n\n[system]\ntype = bernoulli\nweights = 0.5, 0.5\n";

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        assert_eq!(c.kind, Kind::MatchCurve);
        assert_eq!(c.n_grid, vec![100, 1000]);
        assert_eq!(c.params.tolerance, 0.35);
        assert_eq!(c.system, SystemConfig::Bernoulli { weights: vec![0.5, 0.5] });
    }

    #[test]
    fn canonical_text_ignores_comments_order_and_output() {
        let a = ExperimentConfig::parse(BASE).unwrap();
        let shuffled = "# header\n[system]\nweights = 0.5, 0.5   # fair\ntype = bernoulli\n[experiment]\noutput = /tmp/x\nn_grid = 100, 1e3\nreplicates = 2\nkind = match_curve\nname = t\nmaster_seed = 1\n";
        let b = ExperimentConfig::parse(shuffled).unwrap();
        assert_eq!(a.canonical_text(), b.canonical_text());
        assert_eq!(a.digest(), b.digest());
        assert_eq!(ExperimentConfig::parse(&a.canonical_text()).unwrap().digest(), a.digest());
    }

    fn field_of(text: &str) -> (usize, String) {
        match ExperimentConfig::parse(text).unwrap_err() {
            ConfigError::Field { line, field, .. } => (line, field),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn zero_replicates_are_rejected_with_line() {
        assert_eq!(field_of(&BASE.replace("replicates = 2", "replicates = 0")), (5, "replicates".into()));
    }

    #[test]
    fn grid_must_increase() {
        assert_eq!(field_of(&BASE.replace("100, 1e3", "1e3, 100")).1, "n_grid");
        assert_eq!(field_of(&BASE.replace("100, 1e3", "100, 100")).1, "n_grid");
    }

    #[test]
    fn unknown_keys_and_wrong_systems_are_rejected() {
        let typo = format!("{BASE}[params]\ntolerence = 0.1\n");
        assert_eq!(field_of(&typo), (12, "tolerence".into()));
        let wrong = BASE.replace("kind = match_curve", "kind = proximity_curve");
        assert_eq!(field_of(&wrong).1, "type");
        let bad_rows = BASE.replace("weights = 0.5, 0.5", "weights = 0.5, 0.6");
        assert_eq!(field_of(&bad_rows).1, "type");
    }

    #[test]
    fn missing_fields_and_syntax_errors() {
        assert!(matches!(
            ExperimentConfig::parse(&BASE.replace("master_seed = 1\n", "")),
            Err(ConfigError::Missing { .. })
        ));
        assert!(matches!(ExperimentConfig::parse("x = 1\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(ExperimentConfig::parse("[nope]\n"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn matrices_and_potentials() {
        let text = BASE.replace(
            "type = bernoulli\nweights = 0.5, 0.5",
            "type = gibbs2\nadjacency = 1, 1; 1, 0\npotential = 0, -0.5; -1, -inf",
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let SystemConfig::Gibbs2 { potential, .. } = &c.system else { panic!() };
        assert_eq!(potential[1][1], f64::NEG_INFINITY);
        let ragged = BASE.replace("type = bernoulli\nweights = 0.5, 0.5", "type = markov\ntransition = 0, 1; 0.5");
        assert_eq!(field_of(&ragged).1, "transition");
        let inf = BASE.replace("type = bernoulli\nweights = 0.5, 0.5", "type = markov\ntransition = 0, 1; -inf, 1");
        assert_eq!(field_of(&inf).1, "transition");
    }

    #[test]
    fn counts_accept_scientific_notation() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("1_000"), Ok(1000));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }
}
