//! Recurrence statistics for typical orbits of Markov shifts and
//! Gibbs-Markov interval maps.
//!
//! The crate is `no_std` and needs only `alloc`. It covers:
//!
//! - [`symbolic`]: transition systems, shift-invariant measures, cylinder
//!   masses and seeded sampling of typical sequences;
//! - [`thermo`]: exact partition sums, Gurevich pressure, Rényi entropy and
//!   ψ-mixing coefficients for finite-alphabet systems;
//! - [`matcher`]: the longest self-match `M_n` (suffix array + LCP) and
//!   return-time set measures;
//! - [`maps`]: the k-doubling, countable piecewise-affine, Gauss and induced
//!   Manneville–Pomeau maps with explicit precision accounting;
//! - [`proximity`]: the closest-iterate distance `m_n` and its index-gap
//!   variants;
//! - [`estimators`]: correlation integrals, collision-entropy estimates and
//!   exponent fits;
//! - [`diagnostics`]: exact checks of the overlap bounds, ψ decay and the
//!   quasi-Bernoulli constant.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod maps;
pub mod matcher;
pub mod math;
pub mod proximity;
pub mod seed;
pub mod symbolic;
pub mod thermo;

pub use error::{Error, Result};
