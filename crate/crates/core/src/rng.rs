//! Seeded random streams. Every consumer gets a ChaCha8 generator keyed by
//! the user seed and a stream id, so work split across groups or threads
//! draws the same numbers regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a named sub-task.
pub fn derive_seed(seed: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ mix64(tag)) ^ index)
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod tags {
    pub const LOCAL_KMEANS: u64 = 1;
    pub const ATOM_KMEANS: u64 = 2;
    pub const GLOBAL_KMEANS: u64 = 3;
    pub const BARYCENTER: u64 = 4;
    pub const SHARED_SUPPORT: u64 = 5;
}
