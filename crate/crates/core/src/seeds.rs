//! Deterministic seed derivation.
//!
//! Every random component draws its seed from one root seed and a stream
//! counter, so sequential and parallel runs of the same pipeline see the
//! same per-component randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Well-known stream counters for the pipeline stages.
pub mod streams {
    pub const POOL: u64 = 1;
    pub const POLICY_INIT: u64 = 2;
    pub const VALUE_INIT: u64 = 3;
    pub const PRETRAIN: u64 = 4;
    pub const TRAIN: u64 = 5;
    pub const SEARCH: u64 = 6;
    pub const BENCH: u64 = 7;
    pub const HOLDOUT: u64 = 8;
}

/// Mixes a root seed with a stream counter into an independent seed
/// (SplitMix64 finalizer).
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A ChaCha8 generator seeded from `derive_seed(root, stream)`.
pub fn rng_for(root: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, stream))
}
