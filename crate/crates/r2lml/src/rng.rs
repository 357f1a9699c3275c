//! Seeded, named random substreams.
//!
//! All randomness in the crate flows from a single 64-bit seed. Each
//! component draws from its own named substream so that, for example, the
//! synthetic-data draw can be reproduced without replaying initialization.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over the stream name, mixed into the master seed.
fn mix(seed: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    // splitmix64 finalizer over the combination
    let mut z = seed ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A deterministic generator for the substream `name` of `seed`.
pub fn substream(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, name))
}

/// A derived 64-bit seed for indexed children (restarts, grid points).
pub fn derive_seed(seed: u64, name: &str, index: u64) -> u64 {
    mix(mix(seed, name), &index.to_string())
}
