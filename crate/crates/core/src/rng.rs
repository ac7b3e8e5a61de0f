//! Deterministic random substreams.
//!
//! Every stochastic routine draws from ChaCha8, keyed by a 64-bit seed
//! and a cell index mixed through SplitMix64, with the replicate (or
//! permutation) index selecting the ChaCha stream. Results therefore do
//! not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for replicate `index` of `cell` under `seed`.
pub fn substream(seed: u64, cell: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(cell)));
    rng.set_stream(index);
    rng
}
