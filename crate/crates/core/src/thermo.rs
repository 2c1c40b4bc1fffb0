//! Exact thermodynamic quantities for finite-alphabet systems.
//!
//! For a 2-block potential `φ` the periodic-orbit sums are diagonal entries
//! of powers of `M_ab = A_ab e^{φ(a,b)}`, so the Gurevich pressure is the
//! log of the Perron root of `M`. For a Markov measure the block sums
//! `Z_n(1) = Σ μ(C)^2` run through the squared-transition matrix
//! `Q_ab = P_ab^2`, giving `H_2 = -log ρ(Q)`. The same value also equals
//! `2 P_G(φ) - P_G(2φ)`; both routes are computed and compared.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::math;
use crate::symbolic::{validate_system, MarkovChain, MeasureSpec, TransitionSystem};

/// Agreement required between the two entropy routes.
pub const ENTROPY_AGREEMENT_TOL: f64 = 1e-10;
/// Block length above which partition sums are accumulated in log space.
pub const LOG_DOMAIN_THRESHOLD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PressureMethod {
    SpectralRadius,
    PeriodicOrbitSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PressureResult {
    /// `P_G(φ)`, log scale.
    pub value: f64,
    pub method: PressureMethod,
    pub iterations: usize,
    /// The same pressure from periodic-orbit sums at symbol 0.
    pub periodic_orbit_value: f64,
    /// False when the system is not topologically mixing; the value is the
    /// spectral radius either way.
    pub mixing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntropyMethod {
    ClosedForm,
    QMatrix,
    PressureFormula,
    /// Sampled block-collision frequency.
    Collision,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyResult {
    pub h2: f64,
    /// `h2 / 2`.
    pub alpha: f64,
    pub method: EntropyMethod,
    /// Value from an independent route, when one applies.
    pub cross_check: Option<(EntropyMethod, f64)>,
    /// Delta-method standard error for estimates; zero for exact values.
    pub stderr: f64,
}

impl EntropyResult {
    pub fn exact(h2: f64, method: EntropyMethod, cross_check: Option<(EntropyMethod, f64)>) -> Self {
        EntropyResult { h2, alpha: h2 / 2.0, method, cross_check, stderr: 0.0 }
    }
}

/// Weighted transfer matrix `A_ab e^{φ(a,b)}`.
fn transfer_matrix(ts: &TransitionSystem, potential: &Matrix) -> Result<Matrix> {
    let d = ts.alphabet_size();
    if potential.dim() != d {
        return Err(Error::InvalidArgument(format!("potential is {0}x{0}, alphabet has {d} symbols", potential.dim())));
    }
    let mut m = Matrix::zeros(d);
    for a in 0..d {
        for b in 0..d {
            if ts.allows(a as u8, b as u8) {
                let phi = potential.get(a, b);
                if !phi.is_finite() {
                    return Err(Error::InvalidArgument(format!("φ({a},{b}) is not finite")));
                }
                m.set(a, b, math::exp(phi));
            }
        }
    }
    Ok(m)
}

/// Gurevich pressure of a 2-block potential.
pub fn gurevich_pressure(ts: &TransitionSystem, potential: &Matrix) -> Result<PressureResult> {
    let m = transfer_matrix(ts, potential)?;
    let diag = validate_system(ts);
    let perron = linalg::perron(&m);
    if !perron.converged {
        return Err(Error::NoConvergence(perron.iterations));
    }
    Ok(PressureResult {
        value: math::ln(perron.value),
        method: PressureMethod::SpectralRadius,
        iterations: perron.iterations,
        periodic_orbit_value: linalg::log_root_from_periodic_sums(&m, 0),
        mixing: diag.mixing,
    })
}

/// `-log ρ(Q)` with `Q_ab = P_ab^2`.
fn h2_q_matrix(chain: &MarkovChain) -> Result<f64> {
    let q = chain.transition.map(|p| p * p);
    let r = linalg::perron(&q);
    if !r.converged {
        return Err(Error::NoConvergence(r.iterations));
    }
    Ok(-math::ln(r.value))
}

/// `2 P_G(φ) - P_G(2φ)`.
fn h2_pressure_formula(ts: &TransitionSystem, potential: &Matrix) -> Result<f64> {
    let p1 = gurevich_pressure(ts, potential)?.value;
    let p2 = gurevich_pressure(ts, &potential.map(|v| 2.0 * v))?.value;
    Ok(2.0 * p1 - p2)
}

fn log_potential(chain: &MarkovChain) -> Result<(TransitionSystem, Matrix)> {
    let ts = TransitionSystem::from_support(&chain.transition)?;
    let phi = chain.transition.map(|p| if p > 0.0 { math::ln(p) } else { f64::NEG_INFINITY });
    Ok((ts, phi))
}

/// Exact Rényi entropy `H_2`.
///
/// Bernoulli uses `-log Σ p_i^2`; Markov uses the `Q` matrix with the
/// pressure formula as cross-check; Gibbs uses the pressure formula on its
/// potential with the `Q` matrix of the normalised chain as cross-check.
pub fn renyi_entropy_exact(m: &MeasureSpec) -> Result<EntropyResult> {
    match m {
        MeasureSpec::Bernoulli(w) => {
            let h2 = -math::ln(w.iter().map(|p| p * p).sum());
            let support: Vec<f64> = w.iter().copied().filter(|&p| p > 0.0).collect();
            let cross =
                if support.len() == w.len() { Some((EntropyMethod::QMatrix, h2_q_matrix(&m.chain())?)) } else { None };
            Ok(EntropyResult::exact(h2, EntropyMethod::ClosedForm, cross))
        }
        MeasureSpec::Markov(chain) => {
            if chain.stationary.iter().any(|&p| p <= 0.0) {
                return Err(Error::InvalidMeasure("a state has zero stationary mass".into()));
            }
            let h2 = h2_q_matrix(chain)?;
            let (ts, phi) = log_potential(chain)?;
            let cross = h2_pressure_formula(&ts, &phi)?;
            Ok(EntropyResult::exact(h2, EntropyMethod::QMatrix, Some((EntropyMethod::PressureFormula, cross))))
        }
        MeasureSpec::Gibbs2Block(g) => {
            let h2 = h2_pressure_formula(g.system(), g.potential())?;
            let cross = h2_q_matrix(g.chain())?;
            Ok(EntropyResult::exact(h2, EntropyMethod::PressureFormula, Some((EntropyMethod::QMatrix, cross))))
        }
    }
}

/// `log Z_n(t)` where `Z_n(t) = Σ_{|C|=n} μ(C)^{1+t}`.
///
/// `n = 0` gives `log 1 = 0` (the single empty cylinder).
pub fn log_z_partition_sum(m: &MeasureSpec, n: usize, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("exponent t = {t} must be finite and >= 0")));
    }
    if n == 0 {
        return Ok(0.0);
    }
    let e = 1.0 + t;
    if let MeasureSpec::Bernoulli(w) = m {
        let s: f64 = w.iter().map(|&p| if p > 0.0 { math::powf(p, e) } else { 0.0 }).sum();
        return Ok(n as f64 * math::ln(s));
    }
    let chain = m.chain();
    let d = chain.alphabet_size();
    let weights = chain.transition.map(|p| if p > 0.0 { math::powf(p, e) } else { 0.0 });
    let mut v: Vec<f64> = chain.stationary.iter().map(|&p| if p > 0.0 { math::powf(p, e) } else { 0.0 }).collect();
    let log_domain = n > LOG_DOMAIN_THRESHOLD;
    let mut log_scale = 0.0;
    for _ in 1..n {
        v = weights.apply_left(&v);
        if log_domain {
            let s: f64 = v.iter().sum();
            if s == 0.0 {
                return Ok(f64::NEG_INFINITY);
            }
            v.iter_mut().for_each(|x| *x /= s);
            log_scale += math::ln(s);
        }
    }
    debug_assert_eq!(v.len(), d);
    Ok(log_scale + math::ln(v.iter().sum()))
}

/// `Z_n(t)` by dynamic programming over the current symbol (Markov) or the
/// product formula (Bernoulli).
pub fn z_partition_sum(m: &MeasureSpec, n: usize, t: f64) -> Result<f64> {
    if n <= LOG_DOMAIN_THRESHOLD && !matches!(m, MeasureSpec::Bernoulli(_)) {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("exponent t = {t} must be finite and >= 0")));
        }
        if n == 0 {
            return Ok(1.0);
        }
        let chain = m.chain();
        let e = 1.0 + t;
        let weights = chain.transition.map(|p| if p > 0.0 { math::powf(p, e) } else { 0.0 });
        let mut v: Vec<f64> = chain.stationary.iter().map(|&p| if p > 0.0 { math::powf(p, e) } else { 0.0 }).collect();
        for _ in 1..n {
            v = weights.apply_left(&v);
        }
        return Ok(v.iter().sum());
    }
    Ok(math::exp(log_z_partition_sum(m, n, t)?))
}

/// The finite-`n` sequence `-log Z_n(t) / (t n)`.
pub fn renyi_rate(m: &MeasureSpec, n: usize, t: f64) -> Result<f64> {
    if n == 0 || t <= 0.0 {
        return Err(Error::InvalidArgument("need n >= 1 and t > 0".into()));
    }
    Ok(-log_z_partition_sum(m, n, t)? / (t * n as f64))
}

/// `Z_k(1)` against `e^{-2kα}` for `k = 1..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ZDecayTable {
    pub alpha: f64,
    /// `(k, -log Z_k(1) / (2k))`.
    pub rates: Vec<(usize, f64)>,
    /// Smallest and largest `Z_k(1) e^{2kα}`.
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl ZDecayTable {
    /// `ratio_max / ratio_min`.
    pub fn band_width(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }
}

pub fn z_decay_check(m: &MeasureSpec, k_max: usize) -> Result<ZDecayTable> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let alpha = renyi_entropy_exact(m)?.alpha;
    let mut rates = Vec::with_capacity(k_max);
    let mut ratio_min = f64::INFINITY;
    let mut ratio_max = 0.0f64;
    for k in 1..=k_max {
        let log_z = log_z_partition_sum(m, k, 1.0)?;
        rates.push((k, -log_z / (2.0 * k as f64)));
        let ratio = math::exp(log_z + 2.0 * k as f64 * alpha);
        ratio_min = ratio_min.min(ratio);
        ratio_max = ratio_max.max(ratio);
    }
    Ok(ZDecayTable { alpha, rates, ratio_min, ratio_max })
}

/// ψ-mixing coefficient at one gap with its monotone envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiMixing {
    pub k: usize,
    pub psi: f64,
    /// `max_{j >= k} ψ(j)`.
    pub envelope: f64,
}

/// Largest gap examined beyond `k` when forming the envelope.
const ENVELOPE_HORIZON: usize = 4096;

fn psi_from_deviation(chain: &MarkovChain, deviation: &Matrix) -> f64 {
    let d = chain.alphabet_size();
    let mut worst = 0.0f64;
    for a in 0..d {
        if chain.stationary[a] == 0.0 {
            continue;
        }
        for b in 0..d {
            let pb = chain.stationary[b];
            if pb == 0.0 {
                continue;
            }
            worst = worst.max((deviation.get(a, b) / pb).abs());
        }
    }
    worst
}

/// `P - 1π`; its powers are `P^j - 1π`, which avoids the cancellation in
/// forming `P^j / π - 1` once `P^j` is close to its limit.
fn deviation(chain: &MarkovChain) -> Matrix {
    let p = &chain.transition;
    Matrix::from_fn(p.dim(), |a, b| p.get(a, b) - chain.stationary[b])
}

/// `ψ(k) = max_{a,b} |(P^{k+1})_{ab} / π_b - 1|` for the chain of `m`.
///
/// For `E` an `n`-cylinder ending in `a` and `F` a cylinder starting in `b`,
/// `μ(E ∩ σ^{-n-k} F) = μ(E) (P^{k+1})_{ab} μ(F) / π_b`, so this is the
/// supremum in the ψ-mixing inequality.
pub fn psi_mixing_exact(m: &MeasureSpec, k: usize) -> Result<PsiMixing> {
    let chain = m.chain();
    let r = deviation(&chain);
    let mut power = r.pow(k as u64 + 1);
    let psi = psi_from_deviation(&chain, &power);
    let mut envelope = psi;
    for _ in 0..ENVELOPE_HORIZON {
        power = power.mul(&r);
        let next = psi_from_deviation(&chain, &power);
        envelope = envelope.max(next);
        if next < 1e-16 * psi.max(f64::MIN_POSITIVE) || next == 0.0 {
            break;
        }
    }
    Ok(PsiMixing { k, psi, envelope })
}

/// `ψ(0..=k_max)` in one pass.
pub fn psi_profile(m: &MeasureSpec, k_max: usize) -> Result<Vec<f64>> {
    let chain = m.chain();
    let r = deviation(&chain);
    let mut power = r.clone();
    let mut out = vec![psi_from_deviation(&chain, &power)];
    for _ in 0..k_max {
        power = power.mul(&r);
        out.push(psi_from_deviation(&chain, &power));
    }
    Ok(out)
}

/// A rate `ρ` with `μ([w]) <= ρ^{|w|}` for every word.
///
/// Writes `μ([w]) = π_{w_0} Π P` and bounds factors in pairs:
/// `ρ = max(max π, sqrt(max μ([ab])), sqrt(max P_ab P_bc))`.
pub fn cylinder_decay_rate(m: &MeasureSpec) -> f64 {
    let chain = m.chain();
    let d = chain.alphabet_size();
    let p = &chain.transition;
    let mut pi_max = 0.0f64;
    let mut two_block = 0.0f64;
    let mut path = 0.0f64;
    for a in 0..d {
        pi_max = pi_max.max(chain.stationary[a]);
        for b in 0..d {
            two_block = two_block.max(chain.stationary[a] * p.get(a, b));
            for c in 0..d {
                path = path.max(p.get(a, b) * p.get(b, c));
            }
        }
    }
    pi_max.max(math::sqrt(two_block)).max(math::sqrt(path))
}
