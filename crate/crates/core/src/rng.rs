//! Seeded random streams.
//!
//! Every stochastic component draws from ChaCha8, a counter-based generator
//! whose output is fixed by (seed, stream, word position) on every platform.
//! Independent consumers of one global seed use distinct stream ids instead
//! of ad-hoc seed arithmetic, so adding a consumer never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream id namespaces. The low 32 bits carry a per-use index (topic count,
/// slice number, document number, ...).
pub mod stream {
    pub const LDA: u64 = 1 << 32;
    pub const FOLD_IN: u64 = 2 << 32;
    pub const DTM: u64 = 3 << 32;
    pub const SPLIT: u64 = 4 << 32;
    pub const INIT: u64 = 5 << 32;
    pub const SHUFFLE: u64 = 6 << 32;
    pub const DROPOUT: u64 = 7 << 32;
    pub const EMBEDDING: u64 = 8 << 32;
    pub const SWEEP: u64 = 9 << 32;
    pub const SYNTH: u64 = 10 << 32;
}

/// Generator for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Child seed for the `index`-th unit of work under `seed` (SplitMix64
/// finalizer over the combined value).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
