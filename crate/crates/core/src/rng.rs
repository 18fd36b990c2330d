//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from a ChaCha8 generator. ChaCha is
//! a counter-based cipher: the 64-bit seed fixes the key and a 64-bit stream
//! id selects an independent keystream, so substreams never overlap no matter
//! how many values each consumer pulls.
//!
//! Stream ids are derived from a path of integers (for example
//! `[RUN, run_index, SPLIT, source_id]`) by folding them through SplitMix64.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in reports so runs can be reproduced elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), stream = splitmix64 fold of path";

pub type Rng = ChaCha8Rng;

/// Stream-path tags used across the crate.
pub mod tag {
    pub const SPLIT: u64 = 1;
    pub const HYPER: u64 = 2;
    pub const DATA: u64 = 3;
    pub const MODEL: u64 = 4;
    pub const DUAL: u64 = 5;
    pub const TEST_UNIFORM: u64 = 6;
    pub const RUN: u64 = 7;
    pub const TUNE: u64 = 8;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a path of integers into a single stream id.
pub fn stream_id(path: &[u64]) -> u64 {
    path.iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Generator for `seed` on the substream named by `path`.
pub fn substream(seed: u64, path: &[u64]) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(path));
    rng
}

/// Derives a child seed, e.g. the seed of Monte Carlo run `index`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    splitmix64(seed ^ stream_id(path))
}
