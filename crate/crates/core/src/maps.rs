//! Full-branch expanding interval maps and their orbits.
//!
//! The k-doubling map is iterated symbolically: a point is a window of `W`
//! base-`k` digits and one step shifts the window by one digit, so every
//! orbit point and every pairwise distance is an exact rational with
//! denominator `k^W`. The other maps run in `f64`; each point carries the
//! rounding error introduced when it was produced (its noise floor), and an
//! optional dither refills the low bits that exact binary steps such as
//! `2x - 1` shift out.

use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::math;
use crate::seed;

/// Factor between the one-step rounding error and the recorded noise floor.
pub const SHADOW_FACTOR: f64 = 2.0;
/// Burn-in steps applied to uniform starting points of the induced map.
pub const MP_BURN_IN: usize = 1000;
/// Ambient steps allowed before a first return is declared unresolved.
pub const MP_MAX_RETURN_STEPS: usize = 1_000_000;
/// Default branch count of the truncated countable affine map.
pub const DEFAULT_AFFINE_BRANCHES: usize = 40;

/// Breakpoints `1 = a_1 > a_2 > ... > a_{K+1} > 0` of a truncated countable
/// piecewise-affine map; branch `j` is `[a_{j+1}, a_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBranches {
    breakpoints: Vec<f64>,
}

impl AffineBranches {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 3 {
            return Err(Error::InvalidArgument("need at least two branches".into()));
        }
        if breakpoints[0] != 1.0 {
            return Err(Error::InvalidArgument(format!("a_1 must be 1, got {}", breakpoints[0])));
        }
        if breakpoints.windows(2).any(|w| !(w[1] < w[0])) || *breakpoints.last().unwrap() <= 0.0 {
            return Err(Error::InvalidArgument("breakpoints must decrease strictly to a positive value".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] - w[1] >= 1.0) {
            return Err(Error::InvalidArgument("every branch must be expanding".into()));
        }
        Ok(AffineBranches { breakpoints })
    }

    /// `a_k = 2^{1-k}` for `k = 1..=K+1`.
    pub fn geometric(branches: usize) -> Result<Self> {
        Self::new((0..=branches).map(|k| math::exp2(-(k as f64))).collect())
    }

    pub fn branch_count(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    /// Lebesgue mass of the truncated tail `[0, a_{K+1})`.
    pub fn tail_mass(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    /// 1-based branch index containing `x`.
    fn locate(&self, x: f64) -> Result<usize> {
        let a = &self.breakpoints;
        if !(x < 1.0) || x.is_nan() {
            return Err(Error::Endpoint { step: 0, x });
        }
        if x < self.tail_mass() {
            return Err(Error::Tail { step: 0, x });
        }
        // First index whose breakpoint is <= x; branch is that index.
        let idx = a.partition_point(|&b| b > x);
        if a[idx] == x {
            return Err(Error::Endpoint { step: 0, x });
        }
        Ok(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec {
    /// `x ↦ kx mod 1`.
    KDoubling {
        k: u32,
    },
    PiecewiseAffine(AffineBranches),
    /// `x ↦ 1/x mod 1`, `0 ↦ 0`.
    Gauss,
    /// First return to `[0, 1/2)` of the Manneville–Pomeau map with
    /// exponent `a`.
    MpInduced {
        a: f64,
    },
}

/// One application of a map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub image: f64,
    /// `|DT(x)|`.
    pub derivative: f64,
    /// Absolute rounding error committed computing `image`.
    pub rounding: f64,
}

/// A first-return evaluation of the induced Manneville–Pomeau map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstReturnSample {
    pub x: f64,
    pub image: f64,
    pub tau: usize,
    /// Product of `|f'|` along the excursion.
    pub derivative: f64,
    pub rounding: f64,
}

impl MapSpec {
    pub fn k_doubling(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidArgument(format!("k = {k} must be >= 2")));
        }
        Ok(MapSpec::KDoubling { k })
    }

    pub fn mp_induced(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidArgument(format!("exponent a = {a} must lie in (0, 1)")));
        }
        Ok(MapSpec::MpInduced { a })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapSpec::KDoubling { .. } => "doubling",
            MapSpec::PiecewiseAffine(_) => "affine",
            MapSpec::Gauss => "gauss",
            MapSpec::MpInduced { .. } => "mp_induced",
        }
    }

    /// Domain of the map (the induced map lives on `[0, 1/2)`).
    pub fn domain_upper(&self) -> f64 {
        match self {
            MapSpec::MpInduced { .. } => 0.5,
            _ => 1.0,
        }
    }

    /// One step of the map, with derivative and rounding estimate. The
    /// induced map delegates to [`mp_first_return`] without dither.
    pub fn step(&self, x: f64) -> Result<Step> {
        self.step_dithered(x, None)
    }

    fn step_dithered(&self, x: f64, rng: Option<&mut ChaCha8Rng>) -> Result<Step> {
        let eps = f64::EPSILON;
        let s = match self {
            MapSpec::KDoubling { k } => {
                let kx = *k as f64 * x;
                let digit = math::floor(kx);
                if x < 0.0 || x >= 1.0 || (kx == digit && x > 0.0) {
                    return Err(Error::Endpoint { step: 0, x });
                }
                Step { image: kx - digit, derivative: *k as f64, rounding: eps * (1.0 + kx) }
            }
            MapSpec::PiecewiseAffine(br) => {
                let j = br.locate(x)?;
                let (hi, lo) = (br.breakpoints[j - 1], br.breakpoints[j]);
                let slope = 1.0 / (hi - lo);
                Step { image: (x - lo) * slope, derivative: slope, rounding: eps * (1.0 + slope * x) }
            }
            MapSpec::Gauss => {
                if x == 0.0 {
                    return Err(Error::Terminated(0));
                }
                if !(x > 0.0 && x <= 1.0) {
                    return Err(Error::Endpoint { step: 0, x });
                }
                let inv = 1.0 / x;
                let digit = math::floor(inv);
                if inv == digit {
                    return Err(Error::Endpoint { step: 0, x });
                }
                Step { image: inv - digit, derivative: inv * inv, rounding: eps * (1.0 + inv) }
            }
            MapSpec::MpInduced { a } => {
                let r = first_return(*a, x, MP_MAX_RETURN_STEPS, rng)?;
                return Ok(Step { image: r.image, derivative: r.derivative, rounding: r.rounding });
            }
        };
        Ok(match rng {
            Some(rng) => Step { image: dither(s.image, s.rounding, rng), ..s },
            None => s,
        })
    }

    /// Symbolic coding digit of `x`: `⌊kx⌋`, the 1-based affine branch,
    /// `⌊1/x⌋` for Gauss, or the return time for the induced map.
    pub fn partition_index(&self, x: f64) -> Result<u64> {
        match self {
            MapSpec::KDoubling { k } => {
                let kx = *k as f64 * x;
                let digit = math::floor(kx);
                if x < 0.0 || x >= 1.0 || (kx == digit && x > 0.0) {
                    return Err(Error::Endpoint { step: 0, x });
                }
                Ok(digit as u64)
            }
            MapSpec::PiecewiseAffine(br) => br.locate(x).map(|j| j as u64),
            MapSpec::Gauss => {
                if !(x > 0.0 && x <= 1.0) {
                    return Err(Error::Endpoint { step: 0, x });
                }
                let inv = 1.0 / x;
                if inv == math::floor(inv) {
                    return Err(Error::Endpoint { step: 0, x });
                }
                Ok(math::floor(inv) as u64)
            }
            MapSpec::MpInduced { a } => Ok(mp_first_return(*a, x, MP_MAX_RETURN_STEPS)?.tau as u64),
        }
    }
}

/// Adds a uniform perturbation of total width `width` and wraps into `[0, 1)`.
fn dither(y: f64, width: f64, rng: &mut ChaCha8Rng) -> f64 {
    let mut z = y + (rng.gen::<f64>() - 0.5) * width;
    if z < 0.0 {
        z += 1.0;
    }
    if z >= 1.0 {
        z -= 1.0;
    }
    z
}

/// The Manneville–Pomeau map `f(x) = x(1 + 2^a x^a)` on `[0, 1/2)`,
/// `2x - 1` on `[1/2, 1]`, with `|f'(x)|` and rounding estimate.
pub fn mp_map(a: f64, x: f64) -> (f64, f64, f64) {
    let eps = f64::EPSILON;
    if x < 0.5 {
        let xa = math::powf(2.0 * x, a);
        let y = x * (1.0 + xa);
        (y, 1.0 + (1.0 + a) * xa, eps * (1.0 + 2.0 * y))
    } else {
        let y = 2.0 * x - 1.0;
        (y, 2.0, eps * (1.0 + 2.0 * x))
    }
}

fn first_return(a: f64, x: f64, max_steps: usize, mut rng: Option<&mut ChaCha8Rng>) -> Result<FirstReturnSample> {
    if !(x >= 0.0 && x < 0.5) {
        return Err(Error::InvalidArgument(format!("x = {x} is outside [0, 1/2)")));
    }
    let mut y = x;
    let mut derivative = 1.0;
    let mut error = 0.0;
    for tau in 1..=max_steps {
        if y == 0.5 {
            return Err(Error::Endpoint { step: tau, x: y });
        }
        let (next, d, rounding) = mp_map(a, y);
        derivative *= d;
        error = error * d + rounding;
        y = match rng.as_deref_mut() {
            Some(rng) if next != 0.0 => {
                let z = next + (rng.gen::<f64>() - 0.5) * rounding;
                z.clamp(0.0, 1.0)
            }
            _ => next,
        };
        if y < 0.5 {
            return Ok(FirstReturnSample { x, image: y, tau, derivative, rounding: error });
        }
    }
    Err(Error::UnresolvedReturn(max_steps))
}

/// First return of `x ∈ [0, 1/2)` to `[0, 1/2)`.
pub fn mp_first_return(a: f64, x: f64, max_steps: usize) -> Result<FirstReturnSample> {
    first_return(a, x, max_steps, None)
}

/// Orbit storage.
#[derive(Debug, Clone, PartialEq)]
pub enum OrbitPoints {
    /// Point `i` is `windows[i] / base^digits`.
    Exact { windows: Vec<u128>, base: u32, digits: u32 },
    /// Points with their per-point noise floor.
    Floating { points: Vec<f64>, noise: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrbitBuffer {
    pub map: MapSpec,
    pub seed: Option<u64>,
    pub points: OrbitPoints,
}

impl OrbitBuffer {
    pub fn len(&self) -> usize {
        match &self.points {
            OrbitPoints::Exact { windows, .. } => windows.len(),
            OrbitPoints::Floating { points, .. } => points.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.points, OrbitPoints::Exact { .. })
    }

    pub fn point(&self, i: usize) -> f64 {
        match &self.points {
            OrbitPoints::Exact { windows, base, digits } => windows[i] as f64 / scale_f64(*base, *digits),
            OrbitPoints::Floating { points, .. } => points[i],
        }
    }

    /// Zero for exact orbits.
    pub fn noise_floor(&self, i: usize) -> f64 {
        match &self.points {
            OrbitPoints::Exact { .. } => 0.0,
            OrbitPoints::Floating { noise, .. } => noise[i],
        }
    }

    pub fn max_noise_floor(&self) -> f64 {
        match &self.points {
            OrbitPoints::Exact { .. } => 0.0,
            OrbitPoints::Floating { noise, .. } => noise.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

fn scale_f64(base: u32, digits: u32) -> f64 {
    math::powi(base as f64, digits as i32)
}

/// Smallest admissible window: `ceil(4 log_k n) + 16` digits.
pub fn window_floor(k: u32, n: usize) -> u32 {
    let n = n.max(1) as f64;
    math::ceil(4.0 * math::ln(n) / math::ln(k as f64)) as u32 + 16
}

/// Largest window whose digit values (up to `k^W - 1`) fit in `u128`.
pub fn max_window(k: u32) -> u32 {
    let k = k as u128;
    let mut w = 0;
    // Tracks k^w - 1.
    let mut top: u128 = 0;
    while let Some(next) = top.checked_mul(k).and_then(|t| t.checked_add(k - 1)) {
        top = next;
        w += 1;
    }
    w
}

/// Exact k-doubling orbit from a digit stream, enforcing the window floor.
pub fn doubling_orbit_exact(digits: &[u8], k: u32, n: usize, window: u32) -> Result<OrbitBuffer> {
    let floor = window_floor(k, n);
    if window < floor {
        return Err(Error::WindowTooSmall { window, floor, n });
    }
    doubling_orbit_window(digits, k, n, window)
}

/// Exact k-doubling orbit without the window floor: point `i` is the
/// `window`-digit block starting at digit `i`.
pub fn doubling_orbit_window(digits: &[u8], k: u32, n: usize, window: u32) -> Result<OrbitBuffer> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!("k = {k} must be >= 2")));
    }
    if window == 0 || window > max_window(k) {
        return Err(Error::InvalidArgument(format!(
            "window of {window} base-{k} digits does not fit in 128 bits (max {})",
            max_window(k)
        )));
    }
    let w = window as usize;
    if n == 0 || digits.len() < n + w - 1 {
        return Err(Error::InvalidArgument(format!(
            "need {} digits for n = {n}, window {window}; got {}",
            n + w - 1,
            digits.len()
        )));
    }
    if let Some(&d) = digits.iter().find(|&&d| d as u32 >= k) {
        return Err(Error::InvalidArgument(format!("digit {d} is not a base-{k} digit")));
    }
    let k128 = k as u128;
    let top = k128.pow(window - 1);
    let mut cur: u128 = digits[..w].iter().fold(0, |acc, &d| acc * k128 + d as u128);
    let mut windows = Vec::with_capacity(n);
    windows.push(cur);
    for i in 1..n {
        cur = (cur - digits[i - 1] as u128 * top) * k128 + digits[i + w - 1] as u128;
        windows.push(cur);
    }
    Ok(OrbitBuffer {
        map: MapSpec::KDoubling { k },
        seed: None,
        points: OrbitPoints::Exact { windows, base: k, digits: window },
    })
}

/// Uniform random digits from a seeded stream.
pub fn random_digits(k: u32, count: usize, seed: u64) -> Vec<u8> {
    let mut rng = seed::rng_from_seed(seed);
    (0..count).map(|_| rng.gen_range(0..k) as u8).collect()
}

/// Exact k-doubling orbit of a Lebesgue-typical point.
pub fn doubling_orbit_from_seed(k: u32, n: usize, window: u32, seed: u64) -> Result<OrbitBuffer> {
    let digits = random_digits(k, n + window as usize - 1, seed);
    let mut orbit = doubling_orbit_exact(&digits, k, n, window)?;
    orbit.seed = Some(seed);
    Ok(orbit)
}

/// Floating-point iteration mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FloatMode {
    /// When set, each image is perturbed uniformly within its rounding
    /// estimate using a stream derived from this seed.
    pub dither_seed: Option<u64>,
}

/// Floating orbit `x_0, T x_0, ..., T^{n-1} x_0`. Errors carry the step at
/// which an endpoint, the truncated tail or the Gauss fixed point was hit.
pub fn iterate(map: &MapSpec, x0: f64, n: usize, mode: FloatMode) -> Result<OrbitBuffer> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    if !(x0 >= 0.0 && x0 < map.domain_upper()) && !(matches!(map, MapSpec::Gauss) && x0 == 1.0) {
        return Err(Error::InvalidArgument(format!("x0 = {x0} is outside the domain")));
    }
    let mut rng = mode.dither_seed.map(|s| seed::rng_from_seed(seed::derive_seed(s, &[seed::tag::DITHER])));
    let mut points = Vec::with_capacity(n);
    let mut noise = Vec::with_capacity(n);
    points.push(x0);
    noise.push(f64::EPSILON);
    let mut x = x0;
    for step in 1..n {
        let s = map.step_dithered(x, rng.as_mut()).map_err(|e| at_step(e, step))?;
        x = s.image;
        points.push(x);
        noise.push(SHADOW_FACTOR * s.rounding.max(f64::EPSILON));
    }
    Ok(OrbitBuffer { map: map.clone(), seed: mode.dither_seed, points: OrbitPoints::Floating { points, noise } })
}

fn at_step(e: Error, step: usize) -> Error {
    match e {
        Error::Endpoint { x, .. } => Error::Endpoint { step, x },
        Error::Tail { x, .. } => Error::Tail { step, x },
        Error::Terminated(_) => Error::Terminated(step),
        other => other,
    }
}

/// `2^u - 1`, the inverse of the Gauss-measure CDF `log_2(1 + x)`.
pub fn gauss_inverse_cdf(u: f64) -> f64 {
    math::exp2(u) - 1.0
}

pub fn gauss_cdf(x: f64) -> f64 {
    math::ln(1.0 + x) / core::f64::consts::LN_2
}

/// A point distributed according to the invariant measure (Lebesgue for
/// the doubling and affine maps, the Gauss measure for the Gauss map, and
/// a uniform start plus [`MP_BURN_IN`] induced steps for the induced map).
pub fn sample_initial(map: &MapSpec, seed: u64) -> Result<f64> {
    let mut rng = seed::rng_from_seed(seed);
    sample_initial_with(map, &mut rng)
}

pub fn sample_initial_with(map: &MapSpec, rng: &mut ChaCha8Rng) -> Result<f64> {
    const ATTEMPTS: usize = 64;
    for _ in 0..ATTEMPTS {
        let u: f64 = rng.gen();
        let x = match map {
            MapSpec::KDoubling { .. } => u,
            MapSpec::PiecewiseAffine(br) => {
                if u < br.tail_mass() {
                    continue;
                }
                u
            }
            MapSpec::Gauss => {
                let x = gauss_inverse_cdf(u);
                if x == 0.0 {
                    continue;
                }
                x
            }
            MapSpec::MpInduced { .. } => {
                let mut x = 0.5 * u;
                let mut ok = x > 0.0;
                for _ in 0..MP_BURN_IN {
                    if !ok {
                        break;
                    }
                    match map.step_dithered(x, Some(rng)) {
                        Ok(s) if s.image > 0.0 => x = s.image,
                        _ => ok = false,
                    }
                }
                if !ok {
                    continue;
                }
                x
            }
        };
        return Ok(x);
    }
    Err(Error::InvalidArgument(format!("no valid initial point after {ATTEMPTS} draws")))
}

/// `count` independent points from the invariant measure.
pub fn sample_points(map: &MapSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = seed::rng_from_seed(seed);
    (0..count).map(|_| sample_initial_with(map, &mut rng)).collect()
}
