//! Small dense square matrices and Perron–Frobenius power iteration.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Relative change threshold for power iteration.
pub const POWER_TOL: f64 = 1e-13;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 100_000;

/// Row-major square matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from rows; every row must have `rows.len()` entries.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::NotSquare { rows: dim, cols: row.len() });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Matrix { dim, data }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Matrix { dim: self.dim, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    /// `self · v` for a column vector.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum()).collect()
    }

    /// `v · self` for a row vector.
    pub fn apply_left(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, mut k: u64) -> Matrix {
        let mut result = Matrix::identity(self.dim);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| f64::max(m, v.abs()))
    }

    fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// Directed graph of the strictly positive entries.
    pub fn support(&self) -> Vec<Vec<usize>> {
        (0..self.dim).map(|i| (0..self.dim).filter(|&j| self.get(i, j) > 0.0).collect()).collect()
    }

    /// Moduli of all eigenvalues, sorted in decreasing order.
    pub fn eigenvalue_moduli(&self) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        let mut moduli: Vec<f64> =
            m.complex_eigenvalues().iter().map(|c| math::sqrt(c.re * c.re + c.im * c.im)).collect();
        moduli.sort_unstable_by(|a, b| b.total_cmp(a));
        moduli
    }
}

/// Reachability and period data for a directed graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphStructure {
    pub strongly_connected: bool,
    /// gcd of cycle lengths through vertex 0's class; 0 when acyclic.
    pub period: usize,
}

fn reachable(adj: &[Vec<usize>], start: usize, reverse: bool) -> Vec<bool> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(u) = stack.pop() {
        let next: Vec<usize> = if reverse { (0..n).filter(|&v| adj[v].contains(&u)).collect() } else { adj[u].clone() };
        for v in next {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Strong connectivity plus period via BFS levels: for a strongly connected
/// graph the period is gcd over edges (u, v) of `level(u) + 1 - level(v)`.
pub fn graph_structure(adj: &[Vec<usize>]) -> GraphStructure {
    let n = adj.len();
    if n == 0 {
        return GraphStructure { strongly_connected: false, period: 0 };
    }
    let fwd = reachable(adj, 0, false);
    let bwd = reachable(adj, 0, true);
    let strongly_connected = fwd.iter().all(|&b| b) && bwd.iter().all(|&b| b);

    let mut level = vec![usize::MAX; n];
    level[0] = 0;
    let mut queue = alloc::collections::VecDeque::from([0usize]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                level[v] = level[u] + 1;
                queue.push_back(v);
            }
        }
    }
    let mut period = 0;
    for u in 0..n {
        if level[u] == usize::MAX {
            continue;
        }
        for &v in &adj[u] {
            if level[v] == usize::MAX {
                continue;
            }
            let diff = (level[u] + 1) as isize - level[v] as isize;
            period = gcd(period, diff.unsigned_abs());
        }
    }
    GraphStructure { strongly_connected, period }
}

/// Perron root and right eigenvector of a non-negative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronResult {
    pub value: f64,
    /// Positive right eigenvector normalised to sum 1.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Power iteration from the uniform vector. Imprimitive irreducible
/// matrices are iterated as `M + sI` (same Perron vector, root shifted by
/// `s`) so the iteration does not oscillate.
pub fn perron(m: &Matrix) -> PerronResult {
    let d = m.dim();
    let structure = graph_structure(&m.support());
    let shift = if structure.period == 1 { 0.0 } else { m.max_abs() };
    let mut iterated = m.clone();
    for i in 0..d {
        iterated.set(i, i, iterated.get(i, i) + shift);
    }
    // Rescale so entries stay O(1); the eigenvector is unaffected.
    let scale = iterated.max_abs();
    if scale > 0.0 {
        iterated.scale(1.0 / scale);
    }

    let mut v = vec![1.0 / d as f64; d];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < POWER_MAX_ITER {
        iterations += 1;
        let mut w = iterated.apply(&v);
        let norm: f64 = w.iter().sum();
        if norm <= 0.0 {
            break;
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let change = v.iter().zip(&w).map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max);
        v = w;
        if change < POWER_TOL {
            converged = true;
            break;
        }
    }
    let mv = m.apply(&v);
    // Rayleigh-type estimate on the unshifted matrix, weighted by v.
    let num: f64 = mv.iter().sum();
    let den: f64 = v.iter().sum();
    PerronResult { value: num / den, vector: v, iterations, converged }
}

/// Log of the Perron root of `m`, computed from a periodic-orbit sum:
/// `log((M^(N+p))_aa / (M^N)_aa) / p` at `N = 2^12`, where `p` is the
/// period of the graph. Powers are renormalised at each squaring.
pub fn log_root_from_periodic_sums(m: &Matrix, symbol: usize) -> f64 {
    let structure = graph_structure(&m.support());
    let p = structure.period.max(1);
    let mut power = m.clone();
    for _ in 0..12 {
        power = power.mul(&power);
        let s = power.max_abs();
        if s == 0.0 {
            return f64::NEG_INFINITY;
        }
        power.scale(1.0 / s);
    }
    let base = power.get(symbol, symbol);
    let extended = power.mul(&m.pow(p as u64)).get(symbol, symbol);
    math::ln(extended / base) / p as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perron_of_all_ones() {
        let m = Matrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let r = perron(&m);
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-13);
    }

    #[test]
    fn perron_of_two_cycle_uses_shift() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let r = perron(&m);
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-12);
        assert_eq!(graph_structure(&m.support()).period, 2);
    }

    #[test]
    fn golden_mean_root() {
        let m = Matrix::from_rows(&[[1.0, 1.0], [1.0, 0.0]]).unwrap();
        let golden = (1.0 + libm::sqrt(5.0)) / 2.0;
        assert!((perron(&m).value - golden).abs() < 1e-12);
        assert!((log_root_from_periodic_sums(&m, 0) - libm::log(golden)).abs() < 1e-12);
    }

    #[test]
    fn pow_matches_repeated_mul() {
        let m = Matrix::from_rows(&[[0.0, 1.0], [0.5, 0.5]]).unwrap();
        let mut direct = Matrix::identity(2);
        for _ in 0..7 {
            direct = direct.mul(&m);
        }
        let fast = m.pow(7);
        for i in 0..2 {
            for j in 0..2 {
                assert!((direct.get(i, j) - fast.get(i, j)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn eigenvalue_moduli_of_stochastic() {
        let m = Matrix::from_rows(&[[0.9, 0.1], [0.1, 0.9]]).unwrap();
        let ev = m.eigenvalue_moduli();
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 0.8).abs() < 1e-12);
    }
}
