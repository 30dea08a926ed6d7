//! Seed splitting.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by one 64-bit
//! seed and selected by a stream id, so each component draws from its own
//! counter space and results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids for the components that consume randomness.
pub mod stream {
    pub const GAUSSIAN_MATRIX: u64 = 1;
    pub const SIGNS: u64 = 2;
    pub const PERMUTATION: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const PROBES: u64 = 5;
}

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed from a parent seed and a label (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
