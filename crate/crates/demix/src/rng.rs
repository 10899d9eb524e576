//! Deterministic stream RNG.
//!
//! Every randomized task draws from a ChaCha8 generator keyed by the master
//! seed and a per-task stream id, so results are bit-identical across runs
//! and independent of scheduling. Nested tasks (component -> frame retry ->
//! run -> seed point) fold their indices into one stream id with a splitmix
//! chain.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// RNG for a (seed, stream) pair. Distinct streams are independent.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fold task-path indices into a single stream id.
pub fn stream_id(parts: &[u64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for &p in parts {
        h = splitmix(h ^ p.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
