//! Seed derivation. Every experiment cell gets its own stream derived from
//! `(master_seed, kind, n, replicate)`, never from execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags, one per experiment kind.
pub mod tag {
    pub const MATCH: u64 = 1;
    pub const PROXIMITY: u64 = 2;
    pub const D2: u64 = 3;
    pub const H2: u64 = 4;
    pub const DIAGNOSTICS: u64 = 5;
    pub const RETURNS: u64 = 6;
    pub const RESAMPLE: u64 = 0xface;
    pub const DITHER: u64 = 0xd17e;
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` with splitmix64 finalisation.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn cell_seed(master: u64, kind: u64, n: u64, replicate: u64) -> u64 {
    derive_seed(master, &[kind, n, replicate])
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
