//! Finite-alphabet topological Markov shifts: transition systems, invariant
//! measures, cylinder masses and seeded typical sequences.
//!
//! Symbols are `u8`, so alphabets hold at most 256 letters. Countable
//! alphabets are represented by their finite truncations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::seed;

/// Tolerance on the weights of a Bernoulli measure summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Tolerance on row sums of a stochastic matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Tolerance on `πP = π`.
pub const STATIONARY_TOL: f64 = 1e-10;

/// A 0/1 transition matrix `A` over the alphabet `0..alphabet_size`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionSystem {
    admissible: Vec<Vec<bool>>,
}

/// Structural report on a [`TransitionSystem`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDiagnostics {
    pub strongly_connected: bool,
    /// gcd of cycle lengths; meaningful when strongly connected.
    pub period: usize,
    /// Strongly connected and aperiodic.
    pub mixing: bool,
    /// Symbols with an empty row or column.
    pub dead_symbols: Vec<usize>,
}

impl TransitionSystem {
    /// Reads a square matrix whose entries must be exactly 0 or 1.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || n > 256 {
            return Err(Error::AlphabetSize(n));
        }
        let mut admissible = Vec::with_capacity(n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::NotSquare { rows: n, cols: row.len() });
            }
            let mut out = Vec::with_capacity(n);
            for (j, &v) in row.iter().enumerate() {
                if v == 0.0 {
                    out.push(false);
                } else if v == 1.0 {
                    out.push(true);
                } else {
                    return Err(Error::NotBinary { row: i, col: j, value: v });
                }
            }
            admissible.push(out);
        }
        Ok(TransitionSystem { admissible })
    }

    /// The full shift on `k` symbols.
    pub fn full(k: usize) -> Result<Self> {
        if k == 0 || k > 256 {
            return Err(Error::AlphabetSize(k));
        }
        Ok(TransitionSystem { admissible: vec![vec![true; k]; k] })
    }

    /// The support of a non-negative matrix.
    pub fn from_support(m: &Matrix) -> Result<Self> {
        let rows: Vec<Vec<f64>> =
            (0..m.dim()).map(|i| m.row(i).iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()).collect();
        Self::from_rows(&rows)
    }

    #[inline]
    pub fn alphabet_size(&self) -> usize {
        self.admissible.len()
    }

    #[inline]
    pub fn allows(&self, a: u8, b: u8) -> bool {
        self.admissible[a as usize][b as usize]
    }

    pub fn as_matrix(&self) -> Matrix {
        Matrix::from_fn(self.alphabet_size(), |i, j| if self.admissible[i][j] { 1.0 } else { 0.0 })
    }

    pub fn is_admissible(&self, word: &[u8]) -> bool {
        word.iter().all(|&s| (s as usize) < self.alphabet_size()) && word.windows(2).all(|p| self.allows(p[0], p[1]))
    }

    pub fn validate(&self) -> SystemDiagnostics {
        validate_system(self)
    }
}

/// Strong connectivity, period and dead symbols of `ts`.
pub fn validate_system(ts: &TransitionSystem) -> SystemDiagnostics {
    let n = ts.alphabet_size();
    let adj: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| ts.admissible[i][j]).collect()).collect();
    let dead_symbols = (0..n).filter(|&i| adj[i].is_empty() || !(0..n).any(|j| ts.admissible[j][i])).collect();
    let g = linalg::graph_structure(&adj);
    SystemDiagnostics {
        strongly_connected: g.strongly_connected,
        period: g.period,
        mixing: g.strongly_connected && g.period == 1,
        dead_symbols,
    }
}

/// A finite word together with its admissibility under some system.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Word {
    pub symbols: Vec<u8>,
    pub admissible: bool,
}

impl Word {
    pub fn new(symbols: Vec<u8>, ts: &TransitionSystem) -> Self {
        let admissible = ts.is_admissible(&symbols);
        Word { symbols, admissible }
    }
}

/// Stationary Markov chain `(π, P)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChain {
    pub stationary: Vec<f64>,
    pub transition: Matrix,
}

impl MarkovChain {
    pub fn alphabet_size(&self) -> usize {
        self.stationary.len()
    }

    /// `π_{w_0} · Π P_{w_i w_{i+1}}`.
    pub fn word_mass(&self, word: &[u8]) -> f64 {
        let mut mass = self.stationary[word[0] as usize];
        for p in word.windows(2) {
            if mass == 0.0 {
                break;
            }
            mass *= self.transition.get(p[0] as usize, p[1] as usize);
        }
        mass
    }
}

/// A 2-block potential `φ(a, b)` on an admissible system together with the
/// normalised Markov chain of its Gibbs measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Gibbs2Block {
    system: TransitionSystem,
    potential: Matrix,
    chain: MarkovChain,
}

impl Gibbs2Block {
    pub fn system(&self) -> &TransitionSystem {
        &self.system
    }

    /// Potential table; entries on inadmissible pairs are `-inf`.
    pub fn potential(&self) -> &Matrix {
        &self.potential
    }

    pub fn chain(&self) -> &MarkovChain {
        &self.chain
    }
}

/// A shift-invariant measure with exactly computable cylinder masses.
#[derive(Debug, Clone, PartialEq)]
pub enum MeasureSpec {
    Bernoulli(Vec<f64>),
    Markov(MarkovChain),
    Gibbs2Block(Gibbs2Block),
}

impl MeasureSpec {
    /// Bernoulli weights: non-negative, summing to one within 1e-12. Zero
    /// weights are allowed so degenerate measures can be expressed.
    pub fn bernoulli(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() > 256 {
            return Err(Error::AlphabetSize(weights.len()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidMeasure(format!("weights must be finite and >= 0: {weights:?}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {sum}, not 1")));
        }
        Ok(MeasureSpec::Bernoulli(weights))
    }

    pub fn uniform_bernoulli(k: usize) -> Result<Self> {
        Self::bernoulli(vec![1.0 / k as f64; k])
    }

    /// A Markov measure from an explicit `(π, P)` pair.
    pub fn markov(stationary: Vec<f64>, transition: Matrix) -> Result<Self> {
        let d = transition.dim();
        if d == 0 || d > 256 {
            return Err(Error::AlphabetSize(d));
        }
        check_stochastic(&transition)?;
        if stationary.len() != d {
            return Err(Error::InvalidMeasure(format!(
                "stationary vector has {} entries for a {d}x{d} matrix",
                stationary.len()
            )));
        }
        if stationary.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidMeasure("stationary entries must be positive".into()));
        }
        let pp = transition.apply_left(&stationary);
        let err = pp.iter().zip(&stationary).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if err > STATIONARY_TOL {
            return Err(Error::InvalidMeasure(format!("πP differs from π by {err:e}")));
        }
        Ok(MeasureSpec::Markov(MarkovChain { stationary, transition }))
    }

    /// A Markov measure whose stationary vector is computed from `P`.
    pub fn markov_from_transition(transition: Matrix) -> Result<Self> {
        let pi = stationary_distribution(&transition)?;
        Self::markov(pi, transition)
    }

    /// Uniform weights on the admissible successors of each symbol.
    pub fn uniform_edges(ts: &TransitionSystem) -> Result<Self> {
        let d = ts.alphabet_size();
        let p = Matrix::from_fn(d, |i, j| {
            let out = (0..d).filter(|&k| ts.admissible[i][k]).count();
            if ts.admissible[i][j] {
                1.0 / out as f64
            } else {
                0.0
            }
        });
        Self::markov_from_transition(p)
    }

    /// The Gibbs measure of a 2-block potential; `potential` entries on
    /// inadmissible pairs are ignored, all others must be finite.
    pub fn gibbs2(ts: &TransitionSystem, potential: &Matrix) -> Result<Self> {
        let d = ts.alphabet_size();
        if potential.dim() != d {
            return Err(Error::InvalidMeasure(format!("potential is {0}x{0} for an alphabet of {d}", potential.dim())));
        }
        let diag = validate_system(ts);
        if !diag.strongly_connected {
            return Err(Error::Reducible);
        }
        for i in 0..d {
            for j in 0..d {
                if ts.admissible[i][j] && !potential.get(i, j).is_finite() {
                    return Err(Error::InvalidMeasure(format!("φ({i},{j}) is not finite on an admissible pair")));
                }
            }
        }
        let table =
            Matrix::from_fn(d, |i, j| if ts.admissible[i][j] { potential.get(i, j) } else { f64::NEG_INFINITY });
        let weights = table.map(crate::math::exp);
        let right = linalg::perron(&weights);
        let left = linalg::perron(&weights.transpose());
        if !right.converged || !left.converged {
            return Err(Error::NoConvergence(right.iterations.max(left.iterations)));
        }
        let lambda = right.value;
        let r = &right.vector;
        let l = &left.vector;
        let transition = Matrix::from_fn(d, |i, j| weights.get(i, j) * r[j] / (lambda * r[i]));
        // Renormalise rows against rounding.
        let transition = Matrix::from_fn(d, |i, j| {
            let s: f64 = transition.row(i).iter().sum();
            transition.get(i, j) / s
        });
        let norm: f64 = l.iter().zip(r).map(|(a, b)| a * b).sum();
        let stationary: Vec<f64> = l.iter().zip(r).map(|(a, b)| a * b / norm).collect();
        Ok(MeasureSpec::Gibbs2Block(Gibbs2Block {
            system: ts.clone(),
            potential: table,
            chain: MarkovChain { stationary, transition },
        }))
    }

    pub fn alphabet_size(&self) -> usize {
        match self {
            MeasureSpec::Bernoulli(w) => w.len(),
            MeasureSpec::Markov(c) => c.alphabet_size(),
            MeasureSpec::Gibbs2Block(g) => g.chain.alphabet_size(),
        }
    }

    /// The measure as a stationary Markov chain (Bernoulli rows are `p`).
    pub fn chain(&self) -> MarkovChain {
        match self {
            MeasureSpec::Bernoulli(w) => {
                MarkovChain { stationary: w.clone(), transition: Matrix::from_fn(w.len(), |_, j| w[j]) }
            }
            MeasureSpec::Markov(c) => c.clone(),
            MeasureSpec::Gibbs2Block(g) => g.chain.clone(),
        }
    }

    /// The transition system of pairs with positive probability.
    pub fn support(&self) -> Result<TransitionSystem> {
        TransitionSystem::from_support(&self.chain().transition)
    }

    /// Exact mass of the cylinder `[w]`.
    pub fn cylinder(&self, word: &[u8]) -> Result<f64> {
        if word.is_empty() {
            return Err(Error::EmptyWord);
        }
        let d = self.alphabet_size();
        if word.iter().any(|&s| s as usize >= d) {
            return Ok(0.0);
        }
        Ok(match self {
            MeasureSpec::Bernoulli(w) => word.iter().map(|&s| w[s as usize]).product(),
            MeasureSpec::Markov(c) => c.word_mass(word),
            MeasureSpec::Gibbs2Block(g) => g.chain.word_mass(word),
        })
    }

    /// Every pair with positive probability must be admissible in `ts`.
    pub fn check_compatible(&self, ts: &TransitionSystem) -> Result<()> {
        let d = self.alphabet_size();
        if d != ts.alphabet_size() {
            return Err(Error::Incompatible(format!("measure has {d} symbols, system has {}", ts.alphabet_size())));
        }
        let chain = self.chain();
        for a in 0..d {
            if chain.stationary[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                if chain.transition.get(a, b) > 0.0 && !ts.admissible[a][b] {
                    return Err(Error::Incompatible(format!("pair ({a},{b}) has positive mass but A = 0")));
                }
            }
        }
        Ok(())
    }
}

/// Mass of the cylinder of `w` under `m`; zero when `w` is inadmissible.
pub fn cylinder_measure(m: &MeasureSpec, w: &Word) -> Result<f64> {
    m.cylinder(&w.symbols)
}

fn check_stochastic(p: &Matrix) -> Result<()> {
    for i in 0..p.dim() {
        let row = p.row(i);
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure(format!("row {i} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidMeasure(format!("row {i} sums to {s}")));
        }
    }
    Ok(())
}

/// Default iteration cap for [`stationary_distribution`].
pub const STATIONARY_MAX_ITER: usize = 1_000_000;

/// Stationary vector of an irreducible stochastic matrix.
pub fn stationary_distribution(p: &Matrix) -> Result<Vec<f64>> {
    stationary_distribution_with(p, STATIONARY_MAX_ITER)
}

/// Power iteration `π ← π(P + I)/2` from the uniform vector. The lazy chain
/// has the same stationary vector and is aperiodic.
pub fn stationary_distribution_with(p: &Matrix, max_iter: usize) -> Result<Vec<f64>> {
    check_stochastic(p)?;
    let d = p.dim();
    if !linalg::graph_structure(&p.support()).strongly_connected {
        return Err(Error::Reducible);
    }
    let mut pi = vec![1.0 / d as f64; d];
    for _ in 0..max_iter {
        let step = p.apply_left(&pi);
        let mut next: Vec<f64> = pi.iter().zip(&step).map(|(a, b)| 0.5 * (a + b)).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        let change = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if change < 4.0 * f64::EPSILON {
            return Ok(pi);
        }
    }
    let residual = p.apply_left(&pi).iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if residual < STATIONARY_TOL * 1e-2 {
        Ok(pi)
    } else {
        Err(Error::NoConvergence(max_iter))
    }
}

/// A sample path `x_0 .. x_{n+buffer-1}` of the stationary chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence {
    pub symbols: Vec<u8>,
    /// Statistic horizon; symbols past `n` are buffer.
    pub n: usize,
    pub seed: u64,
}

impl SymbolSequence {
    pub fn buffer(&self) -> usize {
        self.symbols.len() - self.n
    }
}

/// Draws `x_0` from `π` and each next symbol from the row of the previous
/// one. Output depends only on `(m, n, buffer, seed)`.
pub fn sample_sequence(
    m: &MeasureSpec,
    ts: &TransitionSystem,
    n: usize,
    buffer: usize,
    seed: u64,
) -> Result<SymbolSequence> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be >= 1".into()));
    }
    m.check_compatible(ts)?;
    let len = n + buffer;
    let mut rng = seed::rng_from_seed(seed);
    let mut symbols = Vec::with_capacity(len);
    match m {
        MeasureSpec::Bernoulli(w) => {
            let dist = WeightedIndex::new(w).map_err(|e| Error::InvalidMeasure(format!("{e}")))?;
            symbols.extend((0..len).map(|_| dist.sample(&mut rng) as u8));
        }
        _ => {
            let chain = m.chain();
            let initial = WeightedIndex::new(&chain.stationary).map_err(|e| Error::InvalidMeasure(format!("{e}")))?;
            let rows: Vec<WeightedIndex<f64>> = (0..chain.alphabet_size())
                .map(|i| WeightedIndex::new(chain.transition.row(i)).map_err(|e| Error::InvalidMeasure(format!("{e}"))))
                .collect::<Result<_>>()?;
            let mut cur = initial.sample(&mut rng);
            symbols.push(cur as u8);
            for _ in 1..len {
                cur = rows[cur].sample(&mut rng);
                symbols.push(cur as u8);
            }
        }
    }
    Ok(SymbolSequence { symbols, n, seed })
}

/// All words of length `len` over `0..alphabet`, in lexicographic order.
pub fn all_words(alphabet: usize, len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * alphabet);
        for w in &out {
            for s in 0..alphabet {
                let mut v = w.clone();
                v.push(s as u8);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> MeasureSpec {
        MeasureSpec::markov(vec![1.0 / 3.0, 2.0 / 3.0], Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap()).unwrap()
    }

    #[test]
    fn full_two_shift_is_mixing() {
        let d = validate_system(&TransitionSystem::full(2).unwrap());
        assert!(d.mixing);
        assert_eq!(d.period, 1);
    }

    #[test]
    fn two_cycle_has_period_two() {
        let ts = TransitionSystem::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let d = validate_system(&ts);
        assert!(d.strongly_connected);
        assert_eq!(d.period, 2);
        assert!(!d.mixing);
    }

    #[test]
    fn golden_mean_is_mixing() {
        let ts = TransitionSystem::from_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        let d = validate_system(&ts);
        assert!(d.mixing);
        assert_eq!(d.period, 1);
        assert!(d.dead_symbols.is_empty());
    }

    #[test]
    fn rejects_bad_matrices() {
        assert!(matches!(TransitionSystem::from_rows(&[vec![1.0, 1.0], vec![1.0]]), Err(Error::NotSquare { .. })));
        assert!(matches!(
            TransitionSystem::from_rows(&[[1.0, 0.5], [1.0, 1.0]]),
            Err(Error::NotBinary { row: 0, col: 1, .. })
        ));
    }

    #[test]
    fn reports_dead_symbols() {
        let ts = TransitionSystem::from_rows(&[[1.0, 0.0], [1.0, 0.0]]).unwrap();
        assert_eq!(validate_system(&ts).dead_symbols, vec![1]);
    }

    #[test]
    fn cylinder_examples() {
        let b = MeasureSpec::uniform_bernoulli(2).unwrap();
        assert_eq!(b.cylinder(&[0, 1, 0]).unwrap(), 0.125);
        let m = two_state();
        assert_eq!(m.cylinder(&[0, 0]).unwrap(), 0.0);
        assert!((m.cylinder(&[0, 1, 1]).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.cylinder(&[]), Err(Error::EmptyWord));
    }

    #[test]
    fn word_flag_follows_system() {
        let ts = TransitionSystem::from_rows(&[[0.0, 1.0], [1.0, 1.0]]).unwrap();
        assert!(!Word::new(vec![0, 0], &ts).admissible);
        assert!(Word::new(vec![0, 1, 1, 0], &ts).admissible);
    }

    #[test]
    fn stationary_examples() {
        let u = Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let pi = stationary_distribution(&u).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15);
        let p = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        assert!((pi[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((pi[1] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(stationary_distribution(&Matrix::identity(2)), Err(Error::Reducible));
    }

    #[test]
    fn stationary_of_periodic_chain() {
        let p = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let pi = stationary_distribution(&p).unwrap();
        assert!((pi[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn markov_validation() {
        let p = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        assert!(MeasureSpec::markov(vec![0.5, 0.5], p.clone()).is_err());
        let bad = Matrix::from_rows(&[[0.2, 0.7], [0.5, 0.5]]).unwrap();
        assert!(MeasureSpec::markov(vec![0.5, 0.5], bad).is_err());
        assert!(MeasureSpec::bernoulli(vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn constant_sequence_from_degenerate_bernoulli() {
        let m = MeasureSpec::bernoulli(vec![1.0, 0.0]).unwrap();
        let ts = TransitionSystem::full(2).unwrap();
        let s = sample_sequence(&m, &ts, 50, 5, 3).unwrap();
        assert!(s.symbols.iter().all(|&x| x == 0));
        assert_eq!(s.buffer(), 5);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = two_state();
        let ts = TransitionSystem::full(2).unwrap();
        let a = sample_sequence(&m, &ts, 1000, 10, 99).unwrap();
        let b = sample_sequence(&m, &ts, 1000, 10, 99).unwrap();
        assert_eq!(a, b);
        let c = sample_sequence(&m, &ts, 1000, 10, 100).unwrap();
        assert_ne!(a.symbols, c.symbols);
        // Inadmissible pair (0,0) never appears.
        assert!(a.symbols.windows(2).all(|p| !(p[0] == 0 && p[1] == 0)));
    }

    #[test]
    fn incompatible_system_rejected() {
        let m = two_state();
        let ts = TransitionSystem::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(sample_sequence(&m, &ts, 10, 0, 1), Err(Error::Incompatible(_))));
    }

    #[test]
    fn gibbs_of_log_transition_is_the_chain() {
        let p = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        let ts = TransitionSystem::from_support(&p).unwrap();
        let phi = p.map(crate::math::ln);
        let g = MeasureSpec::gibbs2(&ts, &phi).unwrap();
        let c = g.chain();
        assert!((c.stationary[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((c.transition.get(1, 0) - 0.5).abs() < 1e-12);
    }
}
