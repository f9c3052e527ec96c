//! Seeded randomness.
//!
//! Every random draw in the simulator comes from [`ChaCha8Rng`], whose output
//! stream is fixed by its algorithm and therefore identical across platforms.
//! Independent streams (per round, per client, per purpose) are obtained by
//! mixing a base seed with a list of integer tags through the SplitMix64
//! finalizer, so results never depend on the order in which streams are
//! created or consumed.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng as SimRng;

/// Stream tags. Keeping them in one place avoids accidental collisions.
pub mod stream {
    pub const INIT: u64 = 1;
    pub const PRETRAIN_DATA: u64 = 2;
    pub const PRETRAIN_SHUFFLE: u64 = 3;
    pub const SCHEDULE: u64 = 4;
    pub const LOCAL_SHUFFLE: u64 = 5;
    pub const CLIENT_SPLIT: u64 = 6;
    pub const SAMPLE_SPLIT: u64 = 7;
    pub const METRIC_PICK: u64 = 8;
    pub const FEDERATION: u64 = 9;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and an ordered list of tags.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn rng_for(base: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tags))
}
