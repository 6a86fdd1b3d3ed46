//! Counter-based RNG stream derivation.
//!
//! Every random draw in an experiment comes from a stream addressed by
//! `(master_seed, label path)`, e.g. `(seed, [experiment, trial, purpose,
//! user])`. Streams are independent of evaluation order and thread count,
//! so parallel trials reproduce the sequential results bit for bit.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a deterministic RNG for the stream addressed by `labels`.
pub fn derive_rng(master_seed: u64, labels: &[u64]) -> ChaCha8Rng {
    let mut state = mix(master_seed ^ GOLDEN);
    for &label in labels {
        state = mix(state ^ mix(label.wrapping_add(GOLDEN)));
    }
    let mut seed = [0u8; 32];
    for (i, chunk) in seed.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(
            &mix(state.wrapping_add((i as u64 + 1).wrapping_mul(GOLDEN))).to_le_bytes(),
        );
    }
    ChaCha8Rng::from_seed(seed)
}
