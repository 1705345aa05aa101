//! Counterfactual random streams.
//!
//! Every independent unit of work (a source row, a variant, a training
//! sample) draws from its own generator, derived purely from the user seed,
//! a usage domain, and the unit's indices. Worker count and scheduling can
//! then never change a single draw, which is what makes parallel generation,
//! training and attacks byte-identical to their serial runs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Usage domains keep streams apart even when their indices coincide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Variant generation: indexed by (source row, variant).
    Augment,
    /// Attack tries: indexed by row.
    Attack,
    /// Synthetic data: indexed by row.
    Synth,
    /// Parameter initialization: indexed by nothing.
    Init,
    /// Per-sample dropout/noise draws during training: indexed by
    /// (epoch, position in the shuffled stream).
    Regularizer,
    /// The shuffle buffer: indexed by epoch.
    Shuffle,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::Augment => 1,
            Domain::Attack => 2,
            Domain::Synth => 3,
            Domain::Init => 4,
            Domain::Regularizer => 5,
            Domain::Shuffle => 6,
        }
    }
}

/// SplitMix64 finalizer; a bijection on u64.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn absorb(h: u64, w: u64) -> u64 {
    mix64(h.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(mix64(w)))
}

/// Generator for the stream identified by `(seed, domain, indices)`.
pub fn rng_for(seed: u64, domain: Domain, indices: &[u64]) -> ChaCha8Rng {
    let mut h = absorb(absorb(0x243F_6A88_85A3_08D3, seed), domain.tag());
    for &ix in indices {
        h = absorb(h, ix);
    }
    let mut key = [0u8; 32];
    let mut state = h;
    for chunk in key.chunks_mut(8) {
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
