//! Seeded random streams.
//!
//! Every stochastic step in the crate (initialization, point sampling,
//! minibatch shuffling) draws from ChaCha8 seeded through
//! [`stream`]. ChaCha8 output is specified by the algorithm itself, so a
//! given seed produces the same numbers on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Derive an independent stream from a user seed and a purpose tag.
///
/// Distinct tags give uncorrelated streams for the same seed, so adding a
/// new consumer never perturbs the draws of an existing one.
pub fn stream(seed: u64, tag: &str) -> Rng {
    // FNV-1a over the tag, mixed into the seed with a splitmix64 finalizer.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}
