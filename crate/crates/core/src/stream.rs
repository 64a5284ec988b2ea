//! Keyed random substreams.
//!
//! Every random draw in a planner comes from a [`StreamKey`] derived by
//! hashing a master seed with a path of labels and indices, for example
//! `(seed, call, "particle", n, step)`. Two draws with the same key path see
//! the same numbers, regardless of evaluation order or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamKey(u64);

// splitmix64 finalizer
const fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

// FNV-1a
const fn hash_label(label: &str) -> u64 {
    let bytes = label.as_bytes();
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut i = 0;
    while i < bytes.len() {
        h ^= bytes[i] as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
        i += 1;
    }
    h
}

impl StreamKey {
    pub const fn new(seed: u64) -> Self {
        StreamKey(mix(seed ^ 0x5eed_5eed_5eed_5eed))
    }

    /// Sub-key for an integer index (particle, step, iteration, ...).
    pub const fn child(self, index: u64) -> Self {
        StreamKey(mix(self.0 ^ mix(index.wrapping_add(0x2545_f491_4f6c_dd1d))))
    }

    /// Sub-key for a purpose label.
    pub const fn label(self, name: &str) -> Self {
        StreamKey(mix(self.0.rotate_left(17) ^ hash_label(name)))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub const fn raw(self) -> u64 {
        self.0
    }
}
