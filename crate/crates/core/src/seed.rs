//! Per-trial seed derivation.
//!
//! Trial `i` of a run with root seed `s` uses `trial_seed(s, i)`, the
//! SplitMix64 finalizer applied to `s` mixed with the golden-ratio-scaled
//! trial index. The mapping is fixed so that results can be cited by
//! `(root seed, trial)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for trial `trial` under root seed `root`.
pub fn trial_seed(root: u64, trial: u64) -> u64 {
    splitmix64(root ^ splitmix64(trial.wrapping_mul(GOLDEN_GAMMA)))
}

/// The generator used everywhere in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for one trial.
pub fn trial_rng(root: u64, trial: u64) -> ChaCha8Rng {
    rng_from_seed(trial_seed(root, trial))
}
