//! Per-replicate random streams.
//!
//! Replicate `i` owns a ChaCha8 stream whose seed depends only on the master
//! seed and `i`, so results never depend on how replicates are scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator every simulation routine in the crate is driven by.
pub type SimRng = ChaCha8Rng;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// First output of a SplitMix64 generator started at `state`.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `master_seed`.
pub fn substream_seed(master_seed: u64, index: usize) -> u64 {
    splitmix64(master_seed ^ (index as u64).wrapping_add(1).wrapping_mul(GOLDEN_GAMMA))
}

pub fn replicate_rng(master_seed: u64, index: usize) -> SimRng {
    SimRng::seed_from_u64(substream_seed(master_seed, index))
}

/// A stream disjoint from every replicate stream, for draws made once per run
/// (e.g. reference posterior samples at the observed data).
pub fn auxiliary_rng(master_seed: u64, tag: u64) -> SimRng {
    let mut rng = SimRng::seed_from_u64(splitmix64(master_seed));
    rng.set_stream(tag.wrapping_add(1));
    rng
}
