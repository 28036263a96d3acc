//! Seeded random streams.
//!
//! Every random draw in a run descends from the single run seed. Independent
//! consumers (a device's training, mobility, data partitioning) get their own
//! stream keyed by a stable tag path, so adding draws in one place never shifts
//! the sequence seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a tag path into a base seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(base), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(base: u64, tags: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tags))
}

/// Stable tags for the different consumers of randomness.
pub mod tag {
    pub const DATA: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const FEATURES: u64 = 3;
    pub const INIT: u64 = 4;
    pub const SHUFFLE: u64 = 5;
    pub const MOBILITY: u64 = 6;
    pub const ENERGY: u64 = 7;
    pub const AUTOENCODER: u64 = 8;
    pub const TRAIN: u64 = 9;
    pub const META: u64 = 10;
    pub const TEST_SPLIT: u64 = 11;
    pub const PROBE: u64 = 12;
}
