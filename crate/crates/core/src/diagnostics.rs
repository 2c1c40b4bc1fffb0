//! Numerical checks of the return-set bounds, ψ-decay against the second
//! eigenvalue, and the quasi-Bernoulli constant.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matcher::{self, ReturnMode};
use crate::math;
use crate::symbolic::{all_words, MeasureSpec};
use crate::thermo;

/// Absolute slack allowed on a bound before it is reported as failing.
pub const BOUND_SLACK: f64 = 1e-12;
/// Default number of word pairs examined by [`quasi_bernoulli_constant`].
pub const DEFAULT_PAIR_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub margin: f64,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(name: String, lhs: f64, rhs: f64) -> Self {
        let margin = rhs - lhs;
        BoundCheck { name, lhs, rhs, margin, pass: margin >= -BOUND_SLACK }
    }
}

/// `max μ([uv]) / (μ([u]) μ([v]))` over words of length `1..=max_len`,
/// by enumeration of all pairs of positive-mass words.
pub fn quasi_bernoulli_constant(m: &MeasureSpec, max_len: usize) -> Result<f64> {
    quasi_bernoulli_constant_with_budget(m, max_len, DEFAULT_PAIR_BUDGET)
}

pub fn quasi_bernoulli_constant_with_budget(m: &MeasureSpec, max_len: usize, budget: usize) -> Result<f64> {
    if max_len == 0 {
        return Err(Error::InvalidArgument("max_len must be >= 1".into()));
    }
    if let MeasureSpec::Bernoulli(_) = m {
        return Ok(1.0);
    }
    let chain = m.chain();
    let d = chain.alphabet_size();
    let word_count: u128 = (1..=max_len as u32).map(|l| (d as u128).saturating_pow(l)).sum();
    if word_count.saturating_mul(word_count) > budget as u128 {
        return Err(Error::CapExceeded(format!("{word_count} words per side exceed the pair budget {budget}")));
    }
    let mut words: Vec<(Vec<u8>, f64)> = Vec::new();
    for len in 1..=max_len {
        for w in all_words(d, len) {
            let mass = chain.word_mass(&w);
            if mass > 0.0 {
                words.push((w, mass));
            }
        }
    }
    let mut best = 1.0f64;
    let mut joined = Vec::with_capacity(2 * max_len);
    for (u, mu) in &words {
        for (v, mv) in &words {
            joined.clear();
            joined.extend_from_slice(u);
            joined.extend_from_slice(v);
            best = best.max(chain.word_mass(&joined) / (mu * mv));
        }
    }
    Ok(best)
}

/// `max P_ab / π_b`, the value the enumeration converges to for Markov
/// measures (the ratio only sees the junction symbol pair).
pub fn quasi_bernoulli_junction(m: &MeasureSpec) -> f64 {
    if let MeasureSpec::Bernoulli(_) = m {
        return 1.0;
    }
    let chain = m.chain();
    let d = chain.alphabet_size();
    let mut best = 1.0f64;
    for a in 0..d {
        if chain.stationary[a] == 0.0 {
            continue;
        }
        for b in 0..d {
            if chain.stationary[b] > 0.0 {
                best = best.max(chain.transition.get(a, b) / chain.stationary[b]);
            }
        }
    }
    best
}

/// Smallest multiple of `k` in `[⌈r/4⌉, ⌊r/2⌋]`, or the largest multiple of
/// `k` not above `⌊r/2⌋` when that interval holds none.
pub fn sigma0_block(r: usize, k: usize) -> usize {
    let lo = r.div_ceil(4).max(1);
    let hi = r / 2;
    let first = lo.div_ceil(k) * k;
    if first <= hi {
        first
    } else {
        (hi / k).max(1) * k
    }
}

/// Compares exact `μ(S_k(r))` with the three regime bounds for
/// `k = 1..=k_max`.
pub fn sigma_bounds_check(m: &MeasureSpec, r: usize, k_max: usize) -> Result<Vec<BoundCheck>> {
    if r < 2 || k_max == 0 {
        return Err(Error::InvalidArgument("need r >= 2 and k_max >= 1".into()));
    }
    let b6 = math::powi(quasi_bernoulli_junction(m), 6);
    let psi = if k_max > r { thermo::psi_profile(m, k_max - r)? } else { Vec::new() };
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let lhs = matcher::return_set_measure(m, r, k, ReturnMode::Exact)?.value;
        let (name, rhs) = if k <= r / 2 {
            let ell = sigma0_block(r, k);
            let omega = r / ell;
            (format!("sigma0 r={r} k={k} l={ell} w={omega}"), b6 * thermo::z_partition_sum(m, ell, omega as f64)?)
        } else if k <= r {
            let z2 = thermo::z_partition_sum(m, r - k, 2.0)?;
            let z1 = thermo::z_partition_sum(m, 2 * k - r, 1.0)?;
            (format!("sigma1 r={r} k={k}"), b6 * z2 * z1)
        } else {
            let z = thermo::z_partition_sum(m, r, 1.0)?;
            (format!("sigma2 r={r} k={k}"), (1.0 + psi[k - r]) * z)
        };
        out.push(BoundCheck::new(name, lhs, rhs));
    }
    Ok(out)
}

/// `ψ(k) <= C |λ_2|^k` for `k = 1..=k_max` with `C = ψ(1) / |λ_2|`. The
/// returned check carries the `k` with the smallest margin.
pub fn psi_decay_check(m: &MeasureSpec, k_max: usize) -> Result<BoundCheck> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    let chain = m.chain();
    let moduli = chain.transition.eigenvalue_moduli();
    let lambda2 = moduli.get(1).copied().unwrap_or(0.0);
    let psi = thermo::psi_profile(m, k_max)?;
    if lambda2 < 1e-14 {
        let worst = psi[1..].iter().copied().fold(0.0, f64::max);
        return Ok(BoundCheck::new(format!("psi decay |l2|=0 k<={k_max}"), worst, 0.0));
    }
    let c = psi[1] / lambda2;
    let mut worst: Option<BoundCheck> = None;
    for (k, &p) in psi.iter().enumerate().skip(1) {
        let check = BoundCheck::new(format!("psi decay k={k} |l2|={lambda2:.6}"), p, c * math::powi(lambda2, k as i32));
        if worst.as_ref().is_none_or(|w| check.margin < w.margin) {
            worst = Some(check);
        }
    }
    Ok(worst.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use alloc::vec;

    fn golden() -> MeasureSpec {
        MeasureSpec::markov_from_transition(Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap()).unwrap()
    }

    #[test]
    fn quasi_bernoulli_examples() {
        let b = MeasureSpec::bernoulli(vec![0.3, 0.7]).unwrap();
        assert_eq!(quasi_bernoulli_constant(&b, 4).unwrap(), 1.0);
        assert!((quasi_bernoulli_constant(&golden(), 6).unwrap() - 1.5).abs() < 1e-12);
        let u = MeasureSpec::markov_from_transition(Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap()).unwrap();
        assert_eq!(quasi_bernoulli_constant(&u, 5).unwrap(), 1.0);
        assert!(quasi_bernoulli_constant_with_budget(&golden(), 8, 100).is_err());
    }

    #[test]
    fn sigma_examples() {
        let u = MeasureSpec::uniform_bernoulli(2).unwrap();
        let checks = sigma_bounds_check(&u, 6, 8).unwrap();
        let k8 = &checks[7];
        assert!((k8.lhs - 1.0 / 64.0).abs() < 1e-15 && k8.margin.abs() < 1e-15 && k8.pass);
        let k3 = &checks[2];
        assert!((k3.lhs - 1.0 / 64.0).abs() < 1e-15 && k3.pass);
        assert!(sigma_bounds_check(&golden(), 6, 12).unwrap().iter().all(|c| c.pass));
    }

    #[test]
    fn block_choice() {
        assert_eq!(sigma0_block(6, 1), 2);
        assert_eq!(sigma0_block(6, 3), 3);
        assert_eq!(sigma0_block(12, 2), 4);
    }

    #[test]
    fn psi_decay_examples() {
        let u = MeasureSpec::uniform_bernoulli(2).unwrap();
        assert!(psi_decay_check(&u, 10).unwrap().pass);
        assert!(psi_decay_check(&golden(), 40).unwrap().pass);
        let sticky =
            MeasureSpec::markov_from_transition(Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap()).unwrap();
        assert!(psi_decay_check(&sticky, 50).unwrap().pass);
    }
}
