//! Longest self-match `M_n` and return-time set measures.
//!
//! `M_n` is the length of the longest block occurring at two start positions
//! `0 <= i < j <= n - 1`. Matches may run past index `n - 1` into the
//! generated buffer but never past the end of the sample; the result
//! records whether the witness crossed the horizon.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};

use crate::error::{Error, Result};
use crate::math;
use crate::seed;
use crate::symbolic::{sample_sequence, MeasureSpec, SymbolSequence, TransitionSystem};
use crate::thermo;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    /// `M_n`.
    pub length: usize,
    pub witness_i: usize,
    pub witness_j: usize,
    pub word: Vec<u8>,
    /// `witness_j + length > n`.
    pub crosses_horizon: bool,
}

impl MatchResult {
    fn new(symbols: &[u8], n: usize, length: usize, i: usize, j: usize) -> Self {
        MatchResult {
            length,
            witness_i: i,
            witness_j: j,
            word: symbols[i..i + length].to_vec(),
            crosses_horizon: j + length > n,
        }
    }
}

/// Suffix array by prefix doubling with two-pass counting sorts.
pub fn suffix_array(text: &[u8]) -> Vec<usize> {
    let n = text.len();
    if n == 0 {
        return Vec::new();
    }
    // Dense symbol ranks.
    let mut present = [false; 256];
    text.iter().for_each(|&c| present[c as usize] = true);
    let mut dense = [0usize; 256];
    let mut next = 0;
    for c in 0..256 {
        if present[c] {
            dense[c] = next;
            next += 1;
        }
    }
    let mut rank: Vec<usize> = text.iter().map(|&c| dense[c as usize]).collect();
    let mut classes = next;

    let mut sa: Vec<usize> = (0..n).collect();
    sa.sort_unstable_by_key(|&i| rank[i]);
    let mut tmp = vec![0usize; n];
    let mut count = vec![0usize; n.max(classes) + 1];
    let mut k = 1;
    while classes < n {
        // Order by second key: suffixes without a second half come first.
        let mut p = 0;
        for i in n - k.min(n)..n {
            tmp[p] = i;
            p += 1;
        }
        for &s in &sa {
            if s >= k {
                tmp[p] = s - k;
                p += 1;
            }
        }
        // Stable counting sort by first key.
        count.iter_mut().for_each(|c| *c = 0);
        for &r in &rank {
            count[r + 1] += 1;
        }
        for c in 1..count.len() {
            count[c] += count[c - 1];
        }
        for &s in tmp.iter() {
            sa[count[rank[s]]] = s;
            count[rank[s]] += 1;
        }
        // Re-rank.
        let key = |i: usize| (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 });
        tmp[sa[0]] = 0;
        let mut c = 0;
        for w in 1..n {
            if key(sa[w]) != key(sa[w - 1]) {
                c += 1;
            }
            tmp[sa[w]] = c;
        }
        core::mem::swap(&mut rank, &mut tmp);
        classes = c + 1;
        k *= 2;
    }
    sa
}

/// Kasai LCP: `lcp[r]` is the common prefix of suffixes `sa[r-1]` and
/// `sa[r]`; `lcp[0] = 0`.
pub fn lcp_array(text: &[u8], sa: &[usize]) -> Vec<usize> {
    let n = text.len();
    let mut inv = vec![0usize; n];
    for (r, &s) in sa.iter().enumerate() {
        inv[s] = r;
    }
    let mut lcp = vec![0usize; n];
    let mut h = 0usize;
    for i in 0..n {
        if inv[i] > 0 {
            let j = sa[inv[i] - 1];
            while i + h < n && j + h < n && text[i + h] == text[j + h] {
                h += 1;
            }
            lcp[inv[i]] = h;
            h = h.saturating_sub(1);
        } else {
            h = 0;
        }
    }
    lcp
}

fn check_horizon(len: usize, n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("horizon n = {n} must be >= 2")));
    }
    if n > len {
        return Err(Error::HorizonTooLong { n, len });
    }
    Ok(())
}

/// `M_n` via suffix array and LCP. Witnesses break ties by smallest `i`,
/// then smallest `j`.
pub fn longest_self_match(symbols: &[u8], n: usize) -> Result<MatchResult> {
    check_horizon(symbols.len(), n)?;
    let sa = suffix_array(symbols);
    let lcp = lcp_array(symbols, &sa);

    // Suffixes starting inside the horizon, in suffix order, each with the
    // common prefix it shares with the previous one.
    let mut chain: Vec<(usize, usize)> = Vec::with_capacity(n);
    let mut run_min = usize::MAX;
    for (r, &s) in sa.iter().enumerate() {
        if r > 0 {
            run_min = run_min.min(lcp[r]);
        }
        if s < n {
            chain.push((s, if chain.is_empty() { 0 } else { run_min }));
            run_min = usize::MAX;
        }
    }
    let best = chain.iter().skip(1).map(|&(_, l)| l).max().unwrap_or(0);
    if best == 0 {
        return Ok(MatchResult::new(symbols, n, 0, 0, 1));
    }

    let mut witness = (usize::MAX, usize::MAX);
    let mut group = (usize::MAX, usize::MAX);
    let close = |g: (usize, usize), w: &mut (usize, usize)| {
        if g.1 != usize::MAX && g < *w {
            *w = g;
        }
    };
    for &(pos, link) in &chain {
        if link < best {
            close(group, &mut witness);
            group = (pos, usize::MAX);
        } else if pos < group.0 {
            group = (pos, group.0);
        } else if pos < group.1 {
            group.1 = pos;
        }
    }
    close(group, &mut witness);
    Ok(MatchResult::new(symbols, n, best, witness.0, witness.1))
}

/// Triple-loop oracle with the same contract as [`longest_self_match`].
pub fn longest_self_match_bruteforce(symbols: &[u8], n: usize) -> Result<MatchResult> {
    check_horizon(symbols.len(), n)?;
    let len = symbols.len();
    let common = |i: usize, j: usize| {
        let mut k = 0;
        while j + k < len && symbols[i + k] == symbols[j + k] {
            k += 1;
        }
        k
    };
    let mut best = (common(0, 1), 0, 1);
    for i in 0..n {
        for j in i + 1..n {
            let k = common(i, j);
            if k > best.0 {
                best = (k, i, j);
            }
        }
    }
    Ok(MatchResult::new(symbols, n, best.0, best.1, best.2))
}

impl SymbolSequence {
    pub fn longest_self_match(&self) -> Result<MatchResult> {
        longest_self_match(&self.symbols, self.n)
    }
}

/// Buffer sizing for [`match_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchOptions {
    /// Buffer length is `ceil(factor · ln n / H_2)`; zero when `H_2 = 0`.
    pub buffer_factor: f64,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions { buffer_factor: 8.0 }
    }
}

pub fn buffer_length(n: usize, h2: f64, opts: &MatchOptions) -> usize {
    if h2 <= 0.0 || n < 2 {
        return 0;
    }
    math::ceil(opts.buffer_factor * math::ln(n as f64) / h2) as usize
}

/// One `(n, replicate)` cell of a match curve.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchCell {
    pub n: usize,
    pub replicate: usize,
    pub seed: u64,
    pub buffer: usize,
    pub m_n: usize,
    /// `M_n / ln n`.
    pub ratio: f64,
    pub crosses_horizon: bool,
}

/// Samples a fresh sequence for one cell and measures `M_n`.
pub fn match_cell(
    m: &MeasureSpec,
    ts: &TransitionSystem,
    n: usize,
    replicate: usize,
    seed: u64,
    h2: f64,
    opts: &MatchOptions,
) -> Result<MatchCell> {
    let buffer = buffer_length(n, h2, opts);
    let seq = sample_sequence(m, ts, n, buffer, seed)?;
    let r = seq.longest_self_match()?;
    Ok(MatchCell {
        n,
        replicate,
        seed,
        buffer,
        m_n: r.length,
        ratio: r.length as f64 / math::ln(n as f64),
        crosses_horizon: r.crosses_horizon,
    })
}

/// Cells for every `n` in `n_grid` and every replicate, ordered by
/// `(n, replicate)`. Each cell draws from its own derived seed.
pub fn match_curve(
    m: &MeasureSpec,
    ts: &TransitionSystem,
    n_grid: &[usize],
    replicates: usize,
    master_seed: u64,
    opts: &MatchOptions,
) -> Result<Vec<MatchCell>> {
    if replicates == 0 {
        return Err(Error::InvalidArgument("replicates must be >= 1".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("n_grid must be strictly increasing".into()));
    }
    let h2 = thermo::renyi_entropy_exact(m)?.h2;
    let mut cells = Vec::with_capacity(n_grid.len() * replicates);
    for &n in n_grid {
        for rep in 0..replicates {
            let s = seed::cell_seed(master_seed, seed::tag::MATCH, n as u64, rep as u64);
            cells.push(match_cell(m, ts, n, rep, s, h2, opts)?);
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnMethod {
    ExactMarkov,
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReturnMode {
    Exact,
    Empirical { samples: usize, seed: u64 },
}

/// Caps on exact return-set computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnCaps {
    /// Largest number of periodic words enumerated when `k < r`.
    pub max_words: usize,
    /// Largest lag accepted when `k >= r`.
    pub max_lag: usize,
}

impl Default for ReturnCaps {
    fn default() -> Self {
        ReturnCaps { max_words: 1 << 22, max_lag: 1 << 16 }
    }
}

/// `μ(S_k(r))` with `S_k(r) = {x : x_{k..k+r} = x_{0..r}}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnSetEstimate {
    pub r: usize,
    pub k: usize,
    pub value: f64,
    pub method: ReturnMethod,
    pub sample_count: usize,
    /// Binomial standard error; zero for exact values.
    pub stderr: f64,
}

pub fn return_set_measure(m: &MeasureSpec, r: usize, k: usize, mode: ReturnMode) -> Result<ReturnSetEstimate> {
    return_set_measure_with(m, r, k, mode, &ReturnCaps::default())
}

pub fn return_set_measure_with(
    m: &MeasureSpec,
    r: usize,
    k: usize,
    mode: ReturnMode,
    caps: &ReturnCaps,
) -> Result<ReturnSetEstimate> {
    if r == 0 || k == 0 {
        return Err(Error::InvalidArgument("r and k must be >= 1".into()));
    }
    match mode {
        ReturnMode::Exact => Ok(ReturnSetEstimate {
            r,
            k,
            value: exact_return_mass(m, r, k, caps)?,
            method: ReturnMethod::ExactMarkov,
            sample_count: 0,
            stderr: 0.0,
        }),
        ReturnMode::Empirical { samples, seed } => empirical_return_mass(m, r, k, samples, seed),
    }
}

fn exact_return_mass(m: &MeasureSpec, r: usize, k: usize, caps: &ReturnCaps) -> Result<f64> {
    let chain = m.chain();
    let d = chain.alphabet_size();
    if k < r {
        // The (r+k)-prefix is k-periodic: sum over its first k symbols.
        let words = (d as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
        if words > caps.max_words as u128 {
            return Err(Error::CapExceeded(format!("{d}^{k} periodic words exceed cap {}", caps.max_words)));
        }
        let mut total = 0.0;
        let mut digits = vec![0u8; k];
        let mut word = vec![0u8; r + k];
        for _ in 0..words as usize {
            for (t, slot) in word.iter_mut().enumerate() {
                *slot = digits[t % k];
            }
            total += chain.word_mass(&word);
            // Odometer increment.
            for dgt in digits.iter_mut().rev() {
                *dgt += 1;
                if (*dgt as usize) < d {
                    break;
                }
                *dgt = 0;
            }
        }
        return Ok(total);
    }
    if k > caps.max_lag {
        return Err(Error::CapExceeded(format!("lag {k} exceeds cap {}", caps.max_lag)));
    }
    // Pair chain over (first symbol, current symbol) of the repeated word;
    // each internal transition is paid twice.
    let sq = chain.transition.map(|p| p * p);
    let mut state = vec![0.0; d * d];
    for a in 0..d {
        state[a * d + a] = chain.stationary[a];
    }
    for _ in 1..r {
        let mut next = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                let v = state[a * d + b];
                if v == 0.0 {
                    continue;
                }
                for c in 0..d {
                    next[a * d + c] += v * sq.get(b, c);
                }
            }
        }
        state = next;
    }
    let link = chain.transition.pow((k - r + 1) as u64);
    let mut total = 0.0;
    for a in 0..d {
        for b in 0..d {
            total += state[a * d + b] * link.get(b, a);
        }
    }
    Ok(total)
}

fn empirical_return_mass(m: &MeasureSpec, r: usize, k: usize, samples: usize, seed: u64) -> Result<ReturnSetEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be >= 1".into()));
    }
    let chain = m.chain();
    let d = chain.alphabet_size();
    let initial = WeightedIndex::new(&chain.stationary).map_err(|e| Error::InvalidMeasure(format!("{e}")))?;
    let rows: Vec<WeightedIndex<f64>> = (0..d)
        .map(|i| WeightedIndex::new(chain.transition.row(i)).map_err(|e| Error::InvalidMeasure(format!("{e}"))))
        .collect::<Result<_>>()?;
    let mut rng = seed::rng_from_seed(seed);
    let mut buf = vec![0u8; r + k];
    let mut hits = 0usize;
    for _ in 0..samples {
        let mut cur = initial.sample(&mut rng);
        buf[0] = cur as u8;
        for slot in buf.iter_mut().skip(1) {
            cur = rows[cur].sample(&mut rng);
            *slot = cur as u8;
        }
        if buf[..r] == buf[k..k + r] {
            hits += 1;
        }
    }
    let p = hits as f64 / samples as f64;
    Ok(ReturnSetEstimate {
        r,
        k,
        value: p,
        method: ReturnMethod::Empirical,
        sample_count: samples,
        stderr: math::sqrt(p * (1.0 - p) / samples as f64),
    })
}
