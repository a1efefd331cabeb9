//! Seeded randomness.
//!
//! Every random object in the crate comes from a ChaCha8 stream seeded through
//! `seed_from_u64`. Per-trial and per-cell streams are derived from a base
//! seed with a SplitMix64 finalizer so that results never depend on the order
//! in which workers pick up tasks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier written into every output record. Bump when the generator or the
/// way it is consumed changes.
pub const PRNG_ID: &str = "chacha8-seed_from_u64/rand0.9/splitmix64-derive";

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed from a base seed and a sequence of indices.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
