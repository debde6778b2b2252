//! Deterministic seed splitting.
//!
//! Every random draw descends from one 64-bit seed. A child seed for a named
//! purpose and index is `splitmix64(seed ^ splitmix64(tag) ^ splitmix64(index + 1))`,
//! and realization `r` of an ensemble uses ChaCha8 seeded with the ensemble
//! seed on stream `r`. Results therefore do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(tag, index)` under `seed`.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag) ^ splitmix64(index.wrapping_add(1)))
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

// Tags used by the library; one per purpose keeps streams disjoint.
pub mod tags {
    pub const GRAPH: u64 = 1;
    pub const FILTER: u64 = 2;
    pub const SIGNALS: u64 = 3;
    pub const WINDOWS: u64 = 4;
    pub const RESTARTS: u64 = 5;
    pub const TRIAL: u64 = 6;
    pub const NOISE: u64 = 7;
}
