//! Deterministic sub-stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by
//! `(seed, index, purpose)`. The three values are mixed with splitmix64 into a
//! 256-bit key, so streams for different rounds or purposes never overlap in
//! practice and can be generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a sub-stream is used for. Distinct tags give independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Rule draws of a schedule.
    Rule,
    /// Agent type draws of a simulation.
    Agent,
    /// Agent pairs of a fairness audit.
    Pair,
    /// Monte-Carlo integration.
    Mc,
    /// Per-step agents of stochastic gradient descent.
    Sgd,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Rule => 0x5255_4c45,
            Purpose::Agent => 0x4147_454e,
            Purpose::Pair => 0x5041_4952,
            Purpose::Mc => 0x4d43_4d43,
            Purpose::Sgd => 0x5347_4444,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the `index`-th stream of `purpose` under `seed`.
pub fn stream(seed: u64, index: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    let mut state = a ^ index.wrapping_mul(0xd6e8_feb8_6659_fd93);
    let b = splitmix64(&mut state);
    let mut state = b ^ purpose.tag().wrapping_mul(0xa076_1d64_78bd_642f);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}
