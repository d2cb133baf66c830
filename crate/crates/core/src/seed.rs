//! Deterministic seed streams.
//!
//! Every stochastic stage draws from a ChaCha8 generator whose seed is derived
//! from a parent seed and a stream index, so results never depend on the order
//! in which parallel work items run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for stream `index` of `seed` (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix(seed
        .wrapping_add(GOLDEN)
        .wrapping_add(mix(index.wrapping_mul(GOLDEN) ^ 0xA076_1D64_78BD_642F)))
}

/// Generator for stream `index` of `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, index))
}
