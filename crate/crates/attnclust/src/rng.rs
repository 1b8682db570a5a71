//! Deterministic, splittable random streams.
//!
//! Every stochastic routine in this crate takes a [`SeedStream`] rather than a
//! bare generator: a stream can be split into arbitrarily many statistically
//! independent child streams by integer tag, so parallel workers draw from
//! disjoint streams and replay bit-identically regardless of scheduling.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Tag reserved for direct consumption via [`SeedStream::rng`], so that child
/// derivation (tags `0..`) never reuses the directly consumed stream.
const DIRECT_TAG: u64 = u64::MAX;

/// A 256-bit key identifying one reproducible random stream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedStream {
    key: [u8; 32],
}

impl SeedStream {
    /// Expands a 64-bit seed into a stream key (SplitMix64 key schedule).
    pub fn from_seed(seed: u64) -> Self {
        let mut state = seed;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            z ^= z >> 31;
            chunk.copy_from_slice(&z.to_le_bytes());
        }
        Self { key }
    }

    /// Derives the child stream with the given tag. Distinct tags yield
    /// independent streams; the same tag always yields the same child.
    pub fn derive(&self, tag: u64) -> Self {
        let mut gen = ChaCha8Rng::from_seed(self.key);
        gen.set_stream(tag);
        let mut key = [0u8; 32];
        gen.fill_bytes(&mut key);
        Self { key }
    }

    /// Concrete generator for this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut gen = ChaCha8Rng::from_seed(self.key);
        gen.set_stream(DIRECT_TAG);
        gen
    }
}
