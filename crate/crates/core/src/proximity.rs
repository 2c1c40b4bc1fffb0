//! Closest-distance statistics `m_n` along an orbit and its index-gap
//! variants, plus short-return frequencies.

use alloc::format;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::ops::Sub;

use rand::Rng;

use crate::error::{Error, Result};
use crate::maps::{self, FloatMode, MapSpec, OrbitBuffer, OrbitPoints};
use crate::math;
use crate::seed;

/// A distance is flagged when it is within this factor of the summed noise
/// floors of its two witnesses.
pub const NOISE_FLOOR_MULTIPLIER: f64 = 64.0;
/// Smallest `eps` accepted by floating short-return estimates.
pub const FLOAT_EPS_FLOOR: f64 = 1e-12;

/// Which index pairs `i < j` are admitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    All,
    /// `j - i <= alpha(n)`.
    Near,
    /// `j - i > alpha(n)`.
    Far,
    /// `i <= floor(n/3)` and `j >= ceil(2n/3)`.
    Split,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::All, Variant::Near, Variant::Far, Variant::Split];

    pub fn name(self) -> &'static str {
        match self {
            Variant::All => "all",
            Variant::Near => "near",
            Variant::Far => "far",
            Variant::Split => "split",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    /// Shortest orbit with at least one admitted pair.
    pub fn min_orbit_len(self, n: usize) -> usize {
        match self {
            Variant::All | Variant::Near => 2,
            Variant::Split => 3,
            Variant::Far => alpha_of(n) + 2,
        }
    }
}

/// `round((ln n)^2)`, rounding halves up, at least 1.
pub fn alpha_of(n: usize) -> usize {
    let l = math::ln(n.max(1) as f64);
    (math::floor(l * l + 0.5) as usize).max(1)
}

#[derive(Debug, Clone, Copy)]
struct Predicate {
    variant: Variant,
    alpha: usize,
    first_max: usize,
    last_min: usize,
}

impl Predicate {
    fn new(variant: Variant, n: usize) -> Result<Self> {
        let alpha = alpha_of(n);
        let p = Predicate { variant, alpha, first_max: n / 3, last_min: (2 * n).div_ceil(3) };
        let needed = variant.min_orbit_len(n);
        if n < needed {
            return Err(Error::InvalidArgument(format!(
                "variant {} needs an orbit of length >= {needed}, got {n}",
                variant.name()
            )));
        }
        Ok(p)
    }

    #[inline]
    fn admits(&self, i: usize, j: usize) -> bool {
        match self.variant {
            Variant::All => true,
            Variant::Near => j - i <= self.alpha,
            Variant::Far => j - i > self.alpha,
            Variant::Split => i <= self.first_max && j >= self.last_min,
        }
    }
}

/// Exact distance `numerator / base^digits` between two window points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExactDistance {
    pub numerator: u128,
    pub base: u32,
    pub digits: u32,
}

impl ExactDistance {
    pub fn neg_ln(&self) -> f64 {
        self.digits as f64 * math::ln(self.base as f64) - math::ln(self.numerator as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityResult {
    pub value: f64,
    pub witness_i: usize,
    pub witness_j: usize,
    pub variant: Variant,
    pub exact: Option<ExactDistance>,
    /// The distance is within [`NOISE_FLOOR_MULTIPLIER`] times the summed
    /// noise floors of the witnesses.
    pub below_noise_floor: bool,
}

impl ProximityResult {
    /// `-ln m_n`, computed from the exact numerator when available.
    pub fn neg_ln(&self) -> f64 {
        match self.exact {
            Some(e) => e.neg_ln(),
            None => -math::ln(self.value),
        }
    }
}

fn better<T: PartialOrd>(cand: &(T, usize, usize), best: &Option<(T, usize, usize)>) -> bool {
    match best {
        None => true,
        Some(b) => match cand.0.partial_cmp(&b.0) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => (cand.1, cand.2) < (b.1, b.2),
            _ => false,
        },
    }
}

/// Sorted scan: from every sorted position walk forward while the value gap
/// does not exceed the best admissible distance found so far.
fn closest_sorted<T>(vals: &[T], pred: Predicate) -> Option<(T, usize, usize)>
where
    T: Copy + PartialOrd + Sub<Output = T>,
{
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_unstable_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    let mut best: Option<(T, usize, usize)> = None;
    for p in 0..order.len() {
        let vp = vals[order[p]];
        for &oq in &order[p + 1..] {
            let gap = vals[oq] - vp;
            if let Some(b) = &best {
                if gap > b.0 {
                    break;
                }
            }
            let (i, j) = if order[p] < oq { (order[p], oq) } else { (oq, order[p]) };
            if pred.admits(i, j) {
                let cand = (gap, i, j);
                if better(&cand, &best) {
                    best = Some(cand);
                }
            }
        }
    }
    best
}

fn closest_brute<T>(vals: &[T], pred: Predicate) -> Option<(T, usize, usize)>
where
    T: Copy + PartialOrd + Sub<Output = T>,
{
    let mut best: Option<(T, usize, usize)> = None;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            if !pred.admits(i, j) {
                continue;
            }
            let d = if vals[i] > vals[j] { vals[i] - vals[j] } else { vals[j] - vals[i] };
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, i, j));
            }
        }
    }
    best
}

fn finish(orbit: &OrbitBuffer, variant: Variant, found: Option<Found>) -> Result<ProximityResult> {
    let found = found.ok_or_else(|| Error::InvalidArgument("no admissible pair".into()))?;
    let (value, i, j, exact) = match found {
        Found::Exact(d, i, j) => {
            let OrbitPoints::Exact { base, digits, .. } = orbit.points else { unreachable!() };
            let e = ExactDistance { numerator: d, base, digits };
            (d as f64 / math::powi(base as f64, digits as i32), i, j, Some(e))
        }
        Found::Float(d, i, j) => (d, i, j, None),
    };
    let floor = NOISE_FLOOR_MULTIPLIER * (orbit.noise_floor(i) + orbit.noise_floor(j));
    Ok(ProximityResult {
        value,
        witness_i: i,
        witness_j: j,
        variant,
        exact,
        below_noise_floor: exact.is_none() && value <= floor,
    })
}

enum Found {
    Exact(u128, usize, usize),
    Float(f64, usize, usize),
}

fn run(orbit: &OrbitBuffer, variant: Variant, brute: bool) -> Result<ProximityResult> {
    let pred = Predicate::new(variant, orbit.len())?;
    let found = match &orbit.points {
        OrbitPoints::Exact { windows, .. } => {
            let r = if brute { closest_brute(windows, pred) } else { closest_sorted(windows, pred) };
            r.map(|(d, i, j)| Found::Exact(d, i, j))
        }
        OrbitPoints::Floating { points, .. } => {
            if points.iter().any(|x| x.is_nan()) {
                return Err(Error::InvalidArgument("orbit contains NaN".into()));
            }
            let r = if brute { closest_brute(points, pred) } else { closest_sorted(points, pred) };
            r.map(|(d, i, j)| Found::Float(d, i, j))
        }
    };
    finish(orbit, variant, found)
}

/// `min |x_i - x_j|` over admissible pairs, ties broken by smallest `(i, j)`.
pub fn closest_pair(orbit: &OrbitBuffer, variant: Variant) -> Result<ProximityResult> {
    run(orbit, variant, false)
}

/// Quadratic reference implementation of [`closest_pair`].
pub fn closest_pair_bruteforce(orbit: &OrbitBuffer, variant: Variant) -> Result<ProximityResult> {
    run(orbit, variant, true)
}

/// Wraps plain points as a floating orbit with a zero noise floor.
pub fn orbit_from_points(map: MapSpec, points: Vec<f64>) -> OrbitBuffer {
    let noise = alloc::vec![0.0; points.len()];
    OrbitBuffer { map, seed: None, points: OrbitPoints::Floating { points, noise } }
}

/// Monte-Carlo estimate of `μ{x : |x - T^n x| <= eps}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortReturnEstimate {
    pub n_iter: usize,
    pub eps: f64,
    pub estimate: f64,
    /// Binomial standard error.
    pub stderr: f64,
    pub samples: usize,
    /// Samples redrawn after hitting an endpoint or a truncated tail.
    pub resampled: usize,
}

/// Short-return frequency. The k-doubling map is evaluated exactly: `x` is
/// a uniform `W`-digit window and `T^n x` shifts it by `n` digits,
/// appending fresh ones.
pub fn short_return_measure(
    map: &MapSpec,
    n_iter: usize,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<ShortReturnEstimate> {
    if !(eps > 0.0) || n_iter == 0 || samples == 0 {
        return Err(Error::InvalidArgument("need eps > 0, n_iter >= 1 and samples >= 1".into()));
    }
    let mut rng = seed::rng_from_seed(seed);
    let mut hits = 0usize;
    let mut resampled = 0usize;
    if eps >= 1.0 {
        hits = samples;
    } else if let MapSpec::KDoubling { k } = map {
        let w = maps::max_window(*k);
        if n_iter as u32 >= w {
            return Err(Error::InvalidArgument(format!("n_iter = {n_iter} exceeds the {w}-digit window")));
        }
        let k = *k as u128;
        let full = k.checked_pow(w).unwrap_or(0);
        let keep = k.pow(w - n_iter as u32);
        let shift = k.pow(n_iter as u32);
        let threshold = eps * math::powi(k as f64, w as i32);
        for _ in 0..samples {
            let x: u128 = if full == 0 { rng.gen() } else { rng.gen_range(0..full) };
            let fresh: u128 = rng.gen_range(0..shift);
            let y = (x % keep) * shift + fresh;
            let d = x.abs_diff(y);
            if (d as f64) <= threshold {
                hits += 1;
            }
        }
    } else {
        if eps < FLOAT_EPS_FLOOR {
            return Err(Error::InvalidArgument(format!("eps = {eps} is below the floating precision floor")));
        }
        let mut taken = 0;
        while taken < samples {
            let x = maps::sample_initial_with(map, &mut rng)?;
            let mut y = x;
            let mut ok = true;
            for _ in 0..n_iter {
                match map.step(y) {
                    Ok(s) => y = s.image,
                    Err(e) if e.is_resample() => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            if !ok {
                resampled += 1;
                continue;
            }
            taken += 1;
            if (x - y).abs() <= eps {
                hits += 1;
            }
        }
    }
    let p = hits as f64 / samples as f64;
    Ok(ShortReturnEstimate {
        n_iter,
        eps,
        estimate: p,
        stderr: math::sqrt(p * (1.0 - p) / samples as f64),
        samples,
        resampled,
    })
}

/// Quality of one curve cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellFlag {
    Ok,
    /// The minimum distance sits at the floating noise floor.
    Floor,
    /// The orbit was redrawn after hitting an endpoint or truncated tail.
    Resampled,
}

impl CellFlag {
    pub fn name(self) -> &'static str {
        match self {
            CellFlag::Ok => "ok",
            CellFlag::Floor => "floor",
            CellFlag::Resampled => "resampled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [CellFlag::Ok, CellFlag::Floor, CellFlag::Resampled].into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProximityOptions {
    /// Iterate k-doubling symbolically on digit windows.
    pub exact_doubling: bool,
    /// Window for exact orbits; defaults to the largest that fits in 128 bits.
    pub window: Option<u32>,
    /// Dither floating orbits.
    pub dither: bool,
    pub max_resamples: u32,
}

impl Default for ProximityOptions {
    fn default() -> Self {
        ProximityOptions { exact_doubling: true, window: None, dither: true, max_resamples: 32 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityCell {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub m_n: f64,
    /// `-ln m_n`.
    pub neg_log: f64,
    /// `-ln m_n / ln n`.
    pub ratio: f64,
    pub witness_i: usize,
    pub witness_j: usize,
    pub flag: CellFlag,
    pub resamples: u32,
}

/// Orbit of length `n` for one cell, redrawing on endpoint or tail hits.
pub fn cell_orbit(map: &MapSpec, n: usize, seed: u64, opts: &ProximityOptions) -> Result<(OrbitBuffer, u32)> {
    if let (MapSpec::KDoubling { k }, true) = (map, opts.exact_doubling) {
        let window = opts.window.unwrap_or_else(|| maps::max_window(*k));
        return Ok((maps::doubling_orbit_from_seed(*k, n, window, seed)?, 0));
    }
    let mut attempt = 0u32;
    loop {
        let s = if attempt == 0 { seed } else { seed::derive_seed(seed, &[seed::tag::RESAMPLE, attempt as u64]) };
        let x0 = maps::sample_initial(map, s)?;
        let mode = FloatMode { dither_seed: opts.dither.then_some(s) };
        match maps::iterate(map, x0, n, mode) {
            Ok(mut orbit) => {
                orbit.seed = Some(s);
                return Ok((orbit, attempt));
            }
            Err(e) if e.is_resample() && attempt < opts.max_resamples => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

pub fn proximity_cell(
    map: &MapSpec,
    n: usize,
    replicate: usize,
    seed: u64,
    variant: Variant,
    opts: &ProximityOptions,
) -> Result<ProximityCell> {
    let (orbit, resamples) = cell_orbit(map, n, seed, opts)?;
    let r = closest_pair(&orbit, variant)?;
    let neg_log = r.neg_ln();
    let flag = if r.below_noise_floor {
        CellFlag::Floor
    } else if resamples > 0 {
        CellFlag::Resampled
    } else {
        CellFlag::Ok
    };
    Ok(ProximityCell {
        n,
        replicate,
        seed,
        m_n: r.value,
        neg_log,
        ratio: neg_log / math::ln(n as f64),
        witness_i: r.witness_i,
        witness_j: r.witness_j,
        flag,
        resamples,
    })
}

/// One cell per `(n, replicate)`, in grid order.
pub fn proximity_curve(
    map: &MapSpec,
    n_grid: &[usize],
    replicates: usize,
    variant: Variant,
    master_seed: u64,
    opts: &ProximityOptions,
) -> Result<Vec<ProximityCell>> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_grid must be strictly increasing".into()));
    }
    let mut out = Vec::with_capacity(n_grid.len() * replicates);
    for &n in n_grid {
        for rep in 0..replicates {
            let s = seed::cell_seed(master_seed, seed::tag::PROXIMITY, n as u64, rep as u64);
            out.push(proximity_cell(map, n, rep, s, variant, opts)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn pts(v: &[f64]) -> OrbitBuffer {
        orbit_from_points(MapSpec::Gauss, v.to_vec())
    }

    #[test]
    fn examples() {
        let o = pts(&[0.1, 0.5, 0.11, 0.9]);
        for r in [closest_pair(&o, Variant::All).unwrap(), closest_pair_bruteforce(&o, Variant::All).unwrap()] {
            assert_eq!((r.witness_i, r.witness_j), (0, 2));
            assert_eq!(r.value, (0.1f64 - 0.11).abs());
        }
        let d = pts(&[0.3, 0.7, 0.3]);
        assert_eq!(closest_pair(&d, Variant::All).unwrap().value, 0.0);
        let s = pts(&[0.0, 0.5, 0.2, 0.3, 0.21, 0.9]);
        for r in [closest_pair(&s, Variant::Split).unwrap(), closest_pair_bruteforce(&s, Variant::Split).unwrap()] {
            assert_eq!((r.witness_i, r.witness_j), (2, 4));
            assert!((r.value - 0.01).abs() < 1e-15);
        }
        let two = pts(&[0.4, 0.4]);
        assert_eq!(closest_pair(&two, Variant::All).unwrap().value, 0.0);
    }

    #[test]
    fn short_orbits_rejected() {
        assert!(closest_pair(&pts(&[0.1]), Variant::All).is_err());
        assert!(closest_pair(&pts(&[0.1, 0.2]), Variant::Split).is_err());
        assert!(closest_pair(&pts(&[0.1, 0.2]), Variant::Far).is_err());
        assert_eq!(closest_pair(&pts(&[0.1, 0.2, 0.3]), Variant::Far).unwrap().witness_j, 2);
    }

    #[test]
    fn alpha_examples() {
        assert_eq!(alpha_of(7), 4);
        assert_eq!(alpha_of(3), 1);
        assert_eq!(alpha_of(2), 1);
    }

    #[test]
    fn short_return_large_eps() {
        let m = MapSpec::k_doubling(2).unwrap();
        assert_eq!(short_return_measure(&m, 3, 1.0, 100, 1).unwrap().estimate, 1.0);
        assert_eq!(short_return_measure(&MapSpec::Gauss, 3, 2.0, 100, 1).unwrap().estimate, 1.0);
        assert!(short_return_measure(&MapSpec::Gauss, 3, 1e-14, 100, 1).is_err());
    }

    #[test]
    fn exact_windows_distance() {
        let digits = vec![0u8, 1, 0, 1, 0, 1, 0];
        let o = maps::doubling_orbit_window(&digits, 2, 2, 6).unwrap();
        let r = closest_pair(&o, Variant::All).unwrap();
        assert_eq!(r.exact.unwrap().numerator, 21);
        assert_eq!(r.value, 21.0 / 64.0);
    }
}
