//! Deterministic seed derivation.
//!
//! Every stochastic component takes an explicit `u64` seed. When one seed has
//! to fan out into independent streams (per trial, per epoch, per submodel),
//! the derived seeds come from [`derive_seed`], a splitmix64 mix of the base
//! seed with a domain tag and an index. The scheme is stable across runs,
//! platforms, and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix_str(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives an independent seed from `base` for the stream named `tag` at
/// position `index`.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ mix_str(tag)) ^ index)
}

/// Seeded ChaCha stream for the derived seed; the crate-wide RNG choice.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
