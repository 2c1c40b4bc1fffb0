//! Empirical estimators: correlation integrals and their dimension fits,
//! block-collision entropy, and exponent fits of match/proximity curves.

use alloc::format;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};

use crate::error::{Error, Result};
use crate::math;
use crate::seed;
use crate::symbolic::MeasureSpec;
use crate::thermo::{EntropyMethod, EntropyResult};

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
    pub point_count: usize,
}

/// OLS fit of `ys` on `xs`; needs at least three points.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    let n = xs.len().min(ys.len());
    if n < 3 {
        return Err(Error::InsufficientPoints { usable: n, needed: 3 });
    }
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let e = y - intercept - slope * x;
            e * e
        })
        .sum();
    let stderr = math::sqrt(sse / (nf - 2.0) / sxx);
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit { slope, intercept, stderr, r_squared, point_count: n })
}

/// Correlation-integral estimates on a grid of radii.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationCurve {
    /// Decreasing radii.
    pub r_grid: Vec<f64>,
    pub c_values: Vec<f64>,
    /// Number of pairs at distance `< r`.
    pub pair_counts: Vec<u64>,
    pub sample_count: usize,
    /// Radius too close to the floating resolution of the points.
    pub floor_flags: Vec<bool>,
}

/// `count` radii from `r_max` down by `decades` decades, log-spaced.
pub fn log_r_grid(r_max: f64, decades: u32, per_decade: u32) -> Vec<f64> {
    let steps = decades * per_decade;
    (0..=steps).map(|i| r_max * math::powf(10.0, -(i as f64) / per_decade as f64)).collect()
}

/// 24 radii per decade over three decades below 0.1.
pub fn default_r_grid() -> Vec<f64> {
    log_r_grid(0.1, 3, 24)
}

/// `C(r) = 2 #{i < j : |x_i - x_j| < r} / (N (N - 1))` by sorting and a
/// two-pointer sweep per radius.
pub fn correlation_integral(points: &[f64], r_grid: &[f64]) -> Result<CorrelationCurve> {
    let n = points.len();
    if n < 2 {
        return Err(Error::InsufficientPoints { usable: n, needed: 2 });
    }
    if r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidArgument("radii must be positive".into()));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("points must be finite".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let scale = sorted.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let total = (n as f64) * (n as f64 - 1.0) / 2.0;
    let mut c_values = Vec::with_capacity(r_grid.len());
    let mut pair_counts = Vec::with_capacity(r_grid.len());
    let mut floor_flags = Vec::with_capacity(r_grid.len());
    for &r in r_grid {
        let mut lo = 0;
        let mut count: u64 = 0;
        for j in 0..n {
            while sorted[j] - sorted[lo] >= r {
                lo += 1;
            }
            count += (j - lo) as u64;
        }
        pair_counts.push(count);
        c_values.push(count as f64 / total);
        floor_flags.push(r <= 64.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE));
    }
    Ok(CorrelationCurve { r_grid: r_grid.to_vec(), c_values, pair_counts, sample_count: n, floor_flags })
}

/// Correlation integral along one orbit, keeping every `stride`-th point.
pub fn orbit_correlation_integral(orbit: &[f64], r_grid: &[f64], stride: usize) -> Result<CorrelationCurve> {
    let pts: Vec<f64> = orbit.iter().step_by(stride.max(1)).copied().collect();
    correlation_integral(&pts, r_grid)
}

/// Which grid entries enter a dimension fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trim {
    /// Entries backed by fewer pairs are dropped.
    pub min_pairs: u64,
    /// Entries with `C(r)` at or above this are saturated.
    pub max_c: f64,
}

impl Default for Trim {
    fn default() -> Self {
        Trim { min_pairs: 10, max_c: 0.5 }
    }
}

fn usable(curve: &CorrelationCurve, trim: Trim) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..curve.r_grid.len() {
        let c = curve.c_values[i];
        if c <= 0.0 || c >= trim.max_c || curve.pair_counts[i] < trim.min_pairs || curve.floor_flags[i] {
            continue;
        }
        xs.push(math::ln(curve.r_grid[i]));
        ys.push(math::ln(c));
    }
    (xs, ys)
}

/// Slope of `ln C` against `ln r` over the trimmed grid.
pub fn d2_estimate(curve: &CorrelationCurve, trim: Trim) -> Result<SlopeFit> {
    let (xs, ys) = usable(curve, trim);
    least_squares(&xs, &ys)
}

/// Smallest and largest slope over sliding windows of `window` usable grid
/// points, standing in for the lower and upper dimensions.
pub fn d2_bounds(curve: &CorrelationCurve, trim: Trim, window: usize) -> Result<(f64, f64)> {
    let (xs, ys) = usable(curve, trim);
    let window = window.max(3);
    if xs.len() < window {
        return Err(Error::InsufficientPoints { usable: xs.len(), needed: window });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for s in 0..=xs.len() - window {
        let f = least_squares(&xs[s..s + window], &ys[s..s + window])?;
        lo = lo.min(f.slope);
        hi = hi.max(f.slope);
    }
    Ok((lo, hi))
}

/// `Ĥ_2 = -ln Ẑ / ℓ` where `Ẑ` is the fraction of colliding pairs among
/// `samples` independent `ℓ`-blocks. The standard error combines the
/// U-statistic variance of `Ẑ` with the delta method.
pub fn h2_collision_estimate(m: &MeasureSpec, block_len: usize, samples: usize, seed: u64) -> Result<EntropyResult> {
    if block_len == 0 {
        return Err(Error::InvalidArgument("block length must be >= 1".into()));
    }
    if samples < 1000 {
        return Err(Error::InvalidArgument(format!("need at least 1000 samples, got {samples}")));
    }
    let chain = m.chain();
    let invalid = |e: rand::distributions::WeightedError| Error::InvalidMeasure(format!("{e}"));
    let initial = WeightedIndex::new(&chain.stationary).map_err(invalid)?;
    let rows: Vec<Option<WeightedIndex<f64>>> =
        (0..chain.alphabet_size()).map(|a| WeightedIndex::new(chain.transition.row(a)).ok()).collect();
    let mut rng = seed::rng_from_seed(seed);
    let mut blocks: Vec<Vec<u8>> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let mut b = Vec::with_capacity(block_len);
        let mut cur = initial.sample(&mut rng);
        b.push(cur as u8);
        for _ in 1..block_len {
            cur = rows[cur].as_ref().ok_or(Error::NotMarkov)?.sample(&mut rng);
            b.push(cur as u8);
        }
        blocks.push(b);
    }
    blocks.sort_unstable();

    let nf = samples as f64;
    let mut pairs = 0.0;
    let mut cubes = 0.0;
    let mut start = 0;
    for i in 1..=samples {
        if i == samples || blocks[i] != blocks[start] {
            let c = (i - start) as f64;
            pairs += c * (c - 1.0) / 2.0;
            cubes += math::powi(c / nf, 3);
            start = i;
        }
    }
    if pairs == 0.0 {
        return Err(Error::NoCollisions);
    }
    let z = pairs / (nf * (nf - 1.0) / 2.0);
    let zeta1 = (cubes - z * z).max(0.0);
    let zeta2 = z * (1.0 - z);
    let var_z = 4.0 * zeta1 / nf + 2.0 * zeta2 / (nf * (nf - 1.0));
    let h2 = -math::ln(z) / block_len as f64;
    Ok(EntropyResult {
        h2,
        alpha: h2 / 2.0,
        method: EntropyMethod::Collision,
        cross_check: None,
        stderr: math::sqrt(var_z) / (z * block_len as f64),
    })
}

/// One replicate of a curve statistic at grid size `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub n: usize,
    /// `M_n` or `-ln m_n`.
    pub value: f64,
    /// Excluded from fits (noise floor).
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub min_points: usize,
    pub min_replicates: usize,
    pub max_excluded_fraction: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { min_points: 3, min_replicates: 3, max_excluded_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub fit: SlopeFit,
    /// `(n, mean value, replicates used)` per grid point.
    pub means: Vec<(usize, f64, usize)>,
    pub excluded: usize,
    pub total: usize,
}

/// Regresses per-`n` means of the statistic on `ln n`. Flagged and
/// non-finite cells are excluded; the fit is refused when more than the
/// allowed fraction of cells is excluded.
pub fn exponent_fit(table: &[CurvePoint], opts: FitOptions) -> Result<ExponentFit> {
    let total = table.len();
    let excluded = table.iter().filter(|c| c.flagged || !c.value.is_finite()).count();
    if total == 0 || excluded as f64 > opts.max_excluded_fraction * total as f64 {
        return Err(Error::TooManyExcluded { excluded, total });
    }
    let mut ns: Vec<usize> = table.iter().map(|c| c.n).collect();
    ns.sort_unstable();
    ns.dedup();
    let mut means = Vec::new();
    for n in ns {
        let vals: Vec<f64> =
            table.iter().filter(|c| c.n == n && !c.flagged && c.value.is_finite()).map(|c| c.value).collect();
        if vals.len() >= opts.min_replicates.max(1) {
            means.push((n, vals.iter().sum::<f64>() / vals.len() as f64, vals.len()));
        }
    }
    if means.len() < opts.min_points.max(3) {
        return Err(Error::InsufficientPoints { usable: means.len(), needed: opts.min_points.max(3) });
    }
    let xs: Vec<f64> = means.iter().map(|m| math::ln(m.0 as f64)).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.1).collect();
    Ok(ExponentFit { fit: least_squares(&xs, &ys)?, means, excluded, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn four_point_example() {
        let c = correlation_integral(&[0.0, 0.25, 0.5, 0.75], &[0.3, 2.0, 0.1]).unwrap();
        assert_eq!(c.c_values, vec![0.5, 1.0, 0.0]);
    }

    #[test]
    fn exact_line() {
        let xs: Vec<f64> = (1..=6).map(|i| i as f64).collect();
        let f = least_squares(&xs, &xs).unwrap();
        assert_eq!(f.slope, 1.0);
        assert!(f.stderr < 1e-15);
        assert!(least_squares(&xs[..2], &xs[..2]).is_err());
    }

    #[test]
    fn degenerate_bernoulli_collides() {
        let m = MeasureSpec::bernoulli(vec![1.0, 0.0]).unwrap();
        let e = h2_collision_estimate(&m, 10, 1000, 3).unwrap();
        assert_eq!(e.h2, 0.0);
    }

    #[test]
    fn no_collisions_reported() {
        let m = MeasureSpec::uniform_bernoulli(2).unwrap();
        assert_eq!(h2_collision_estimate(&m, 60, 1000, 1), Err(Error::NoCollisions));
    }

    #[test]
    fn synthetic_match_table() {
        let mut table = Vec::new();
        for &n in &[1000usize, 10_000, 100_000, 1_000_000] {
            for _ in 0..3 {
                table.push(CurvePoint { n, value: 2.885 * math::ln(n as f64), flagged: false });
            }
        }
        let f = exponent_fit(&table, FitOptions::default()).unwrap();
        assert!((f.fit.slope - 2.885).abs() < 1e-12);
        for c in table.iter_mut().take(7) {
            c.flagged = true;
        }
        assert!(matches!(exponent_fit(&table, FitOptions::default()), Err(Error::TooManyExcluded { .. })));
    }
}
