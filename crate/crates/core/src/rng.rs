//! Seed handling. Every stochastic component draws from a ChaCha stream whose
//! seed is derived from a master seed plus context words.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

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

/// Folds context words into a master seed.
pub fn derive_seed(master: u64, context: &[u64]) -> u64 {
    context
        .iter()
        .fold(splitmix64(master), |acc, &word| splitmix64(acc ^ splitmix64(word)))
}
