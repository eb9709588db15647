//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`seeded`], which builds a
//! ChaCha8 stream cipher generator (`rand_chacha::ChaCha8Rng`) from a 64-bit
//! seed. Absolute numbers on synthetic graphs depend on this choice of
//! generator: a different generator with the same seed produces a different
//! graph from the same distribution.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent sub-seed (splitmix64 finalizer over `seed ^ stream`).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
