//! Seed derivation for independent, reproducible generator streams.
//!
//! Every conversation draws from its own stream derived from
//! `(master_seed, template_id, instance_ordinal)`, so the output of one
//! conversation never depends on which other conversations were generated
//! or in which order worker threads ran.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the pipeline. ChaCha output is specified
/// independently of platform and crate version, unlike `StdRng`.
pub type DialogRng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `path` into `base` with a splitmix64 finalizer per component.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(base.wrapping_add(GOLDEN_GAMMA)), |acc, &part| mix64(acc ^ mix64(part.wrapping_add(GOLDEN_GAMMA))))
}

pub fn rng_from_seed(seed: u64) -> DialogRng {
    DialogRng::seed_from_u64(seed)
}

/// Shorthand for `rng_from_seed(derive_seed(base, path))`.
pub fn derive_rng(base: u64, path: &[u64]) -> DialogRng {
    rng_from_seed(derive_seed(base, path))
}
