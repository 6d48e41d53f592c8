//! Counter-based randomness for the environment and seed derivation for
//! trajectories. Environment values are pure functions of
//! `(seed, tag, coordinates)`, so any site or index can be regenerated
//! without replaying a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const TAG_ETA: u64 = 0x6574_615f_7374_6570;
pub const TAG_DELTA: u64 = 0x6465_6c74_615f_7369;
pub const TAG_ENV: u64 = 0x656e_765f_7265_706c;
pub const TAG_WALK: u64 = 0x7761_6c6b_5f74_7261;
pub const TAG_LIMIT: u64 = 0x6c69_6d69_745f_7061;
pub const TAG_ORACLE: u64 = 0x6f72_6163_6c65_5f69;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn hash2(a: u64, b: u64) -> u64 {
    splitmix64(a ^ splitmix64(b))
}

/// Hash of a seed, a stream tag and a sequence of signed coordinates.
#[inline]
pub fn hash_coords(seed: u64, tag: u64, coords: &[i64]) -> u64 {
    let mut h = hash2(seed, tag);
    for &c in coords {
        h = hash2(h, c as u64);
    }
    splitmix64(h ^ coords.len() as u64)
}

/// Map 64 random bits to a uniform double in `[0, 1)`.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Child seed for replica `index` of a stream.
pub fn derive_seed(master: u64, tag: u64, index: u64) -> u64 {
    hash2(hash2(master, tag), index)
}

pub fn stream(master: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}
