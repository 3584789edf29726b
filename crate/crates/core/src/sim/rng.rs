//! Seed splitting.
//!
//! Every simulation takes one root seed. Independent units of work (a shot,
//! a trace in a sweep, a Monte Carlo repetition) draw from their own
//! ChaCha8 stream whose seed is the `(index + 1)`-th output of a SplitMix64
//! generator started at the root seed:
//!
//! ```text
//! derive_seed(root, index) = mix(root + (index + 1) · 0x9E3779B97F4A7C15)
//! ```
//!
//! so results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(root: u64, index: u64) -> u64 {
    splitmix64_mix(root.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Generator for work unit `index` under `root`.
pub fn stream_rng(root: u64, index: u64) -> SimRng {
    SimRng::seed_from_u64(derive_seed(root, index))
}
