//! Seeded, splittable random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha8 stream keyed by
//! `(seed, domain)` and selected by `index`, so a layer or a sample can be
//! regenerated on its own, in any order and on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub const DOMAIN_NETWORK: u64 = 0x6e65_7477;
pub const DOMAIN_SAMPLE: u64 = 0x7361_6d70;
pub const DOMAIN_RECOVERY: u64 = 0x7265_636f;
pub const DOMAIN_NOISE: u64 = 0x6e6f_6973;
pub const DOMAIN_AUX: u64 = 0x6175_7869;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream `index` of the generator keyed by `(seed, domain)`.
pub fn stream(seed: u64, domain: u64, index: u64) -> Rng {
    let mut key = [0u8; 32];
    let words = [
        splitmix(seed),
        splitmix(seed ^ domain.rotate_left(17)),
        splitmix(domain),
        splitmix(seed.wrapping_add(domain)),
    ];
    for (chunk, w) in key.chunks_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derive a child seed, used to chain seeds across attempts or sub-experiments.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    splitmix(splitmix(seed) ^ tag)
}
