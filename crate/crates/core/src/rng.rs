//! Reproducible random streams keyed by `(master_seed, replica, stream tag)`.
//!
//! Drivers draw a fresh stream per generation so that two runs which agree on
//! the occupied sites near the front consume identical random numbers there,
//! whatever happens elsewhere (this is what couples exact and frontier runs).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream tags used across the crate.
pub mod tags {
    pub const SINGLE: u64 = 0;
    pub const RED: u64 = 1;
    pub const BLUE: u64 = 2;
    pub const TIE: u64 = 3;
    pub const TREE: u64 = 4;
    pub const BOOTSTRAP: u64 = 5;
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |h, &p| splitmix64(h ^ splitmix64(p)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub master_seed: u64,
    pub replica: u64,
    pub tag: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, replica: u64, tag: u64) -> Self {
        StreamKey { master_seed, replica, tag }
    }

    pub fn with_tag(self, tag: u64) -> Self {
        StreamKey { tag, ..self }
    }

    /// One stream for the whole replica.
    pub fn rng(&self) -> SimRng {
        SimRng::seed_from_u64(mix(&[self.master_seed, self.replica, self.tag]))
    }

    /// Stream dedicated to one generation of the replica.
    pub fn generation_rng(&self, generation: u64) -> SimRng {
        SimRng::seed_from_u64(mix(&[self.master_seed, self.replica, self.tag, generation, 1]))
    }
}
