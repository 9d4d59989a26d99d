//! Seeded random streams.
//!
//! A single master seed fans out into named, indexed sub-streams. Each
//! sub-stream is a ChaCha12 generator keyed by the master seed and positioned
//! on its own stream id, so adding a new consumer never shifts the draws seen
//! by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Generator type used throughout the crate.
pub type SimRng = ChaCha12Rng;

/// Master seed with named sub-stream derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    /// Stream `name`, instance `index`.
    pub fn stream(&self, name: &str, index: u64) -> SimRng {
        let mut seed = [0u8; 32];
        let mut state = self.master;
        for chunk in seed.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = SimRng::from_seed(seed);
        rng.set_stream(stream_id(name, index));
        rng
    }

    /// A child tree, used to give each repetition an independent family of streams.
    pub fn child(&self, name: &str, index: u64) -> SeedTree {
        let mut state = self.master ^ stream_id(name, index);
        SeedTree::new(splitmix64(&mut state))
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// FNV-1a over the name, mixed with the index.
fn stream_id(name: &str, index: u64) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    let mut state = hash ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    splitmix64(&mut state)
}
