//! Deterministic seed derivation.
//!
//! Every sampled object gets its own ChaCha stream whose seed is a pure
//! function of (master seed, tag, index). Parallel evaluation order therefore
//! never changes results.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags keep independent uses of the same master seed apart.
pub const STREAM_TASK: u64 = 0x01;
pub const STREAM_REPLICA: u64 = 0x02;
pub const STREAM_EVAL: u64 = 0x03;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a master seed, a stream tag and an index.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(tag)).wrapping_add(index))
}

/// RNG for a derived stream.
pub fn stream_rng(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}

/// RNG seeded directly (used where the caller already holds a leaf seed).
pub fn seed_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
