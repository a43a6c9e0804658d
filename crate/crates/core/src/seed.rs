//! Named, independent random streams derived from one master seed.
//!
//! Every consumer of randomness (weight init, batch order, channel noise,
//! evaluation runs) gets its own stream, so changing how much randomness one
//! consumer draws never perturbs the others. A whole training/evaluation
//! pipeline is therefore a deterministic function of the master seed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Derives independent named RNG streams from a single master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedSpace {
    master: u64,
}

impl SeedSpace {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// RNG stream identified by `name`.
    pub fn stream(&self, name: &str) -> ChaCha8Rng {
        self.indexed_stream(name, 0)
    }

    /// RNG stream identified by `name` and an index (per-run, per-cell, ...).
    pub fn indexed_stream(&self, name: &str, index: u64) -> ChaCha8Rng {
        let mut state = self
            .master
            .wrapping_add(fnv1a64(name.as_bytes()))
            .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut seed = [0u8; 32];
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(seed)
    }

    /// A derived 64-bit seed, for handing a whole sub-pipeline its own seed
    /// space.
    pub fn derive(&self, name: &str, index: u64) -> u64 {
        let mut state = self
            .master
            .wrapping_add(fnv1a64(name.as_bytes()))
            .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        splitmix64(&mut state)
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
