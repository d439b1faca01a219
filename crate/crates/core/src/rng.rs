//! Seeded random streams.
//!
//! Every stochastic component takes an explicit stream; parallel work derives
//! one stream per shard from the master seed, so results do not depend on
//! the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a master seed with a path of stream labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(master), |acc, &p| splitmix(acc ^ splitmix(p)))
}

pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

/// Stream labels used across the crate.
pub mod label {
    pub const DATA: u64 = 1;
    pub const DSR: u64 = 2;
    pub const BOB_CHANNEL: u64 = 3;
    pub const EVE_CHANNEL: u64 = 4;
    pub const TRIAL: u64 = 5;
    pub const SHARD: u64 = 6;
    pub const BASELINE: u64 = 7;
    pub const KEYS: u64 = 8;
}
