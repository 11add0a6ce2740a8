//! Counter-based stream derivation.
//!
//! Every random draw in a simulation belongs to a stream keyed by
//! `(base_seed, replicate, generation, site ordinal)`, so the order in
//! which sites or replicates are processed never changes the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(state: u64, word: u64) -> u64 {
    mix64(state.wrapping_add(GOLDEN) ^ mix64(word.wrapping_add(GOLDEN)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ReplicateSeed {
    pub base_seed: u64,
    pub replicate_index: u64,
}

impl ReplicateSeed {
    pub fn new(base_seed: u64, replicate_index: u64) -> Self {
        ReplicateSeed {
            base_seed,
            replicate_index,
        }
    }

    /// 64-bit key of the stream for one site visit.
    pub fn key(&self, generation: u64, ordinal: u64) -> u64 {
        let h = absorb(mix64(self.base_seed), self.replicate_index);
        absorb(absorb(h, generation), ordinal)
    }

    pub fn stream(&self, generation: u64, ordinal: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.key(generation, ordinal))
    }
}
