//! Deterministic random streams.
//!
//! Every random draw in a sweep comes from a stream addressed by
//! `(root seed, snr index, trial index, purpose)`. Streams are ChaCha8
//! generators keyed by a SplitMix64 expansion of the address, so the draws a
//! trial sees never depend on which worker thread ran it or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used for every stream in the crate.
pub type StreamRng = ChaCha8Rng;

/// What a stream is used for inside one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Channel,
    Symbols,
    Noise,
    /// Seeds the trajectory streams of a Langevin detector.
    Trajectories,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Channel => 1,
            Purpose::Symbols => 2,
            Purpose::Noise => 3,
            Purpose::Trajectories => 4,
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn key_from_words(words: &[u64]) -> [u8; 32] {
    let mut state = 0x243F_6A88_85A3_08D3u64;
    for &w in words {
        let mut mixed = state ^ w;
        state = splitmix64(&mut mixed);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// Root of the stream tree for one experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        Self { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// Stream for one purpose of one trial at one SNR point.
    pub fn stream(&self, snr_index: usize, trial_index: usize, purpose: Purpose) -> StreamRng {
        let key = key_from_words(&[
            self.root,
            snr_index as u64,
            trial_index as u64,
            purpose.code(),
        ]);
        StreamRng::from_seed(key)
    }
}

/// Independent stream `index` derived from `base_seed`.
///
/// Used for the trajectories of one detection call: trajectory `m` always
/// gets `indexed_stream(base, m)`.
pub fn indexed_stream(base_seed: u64, index: usize) -> StreamRng {
    let mut rng = StreamRng::from_seed(key_from_words(&[base_seed]));
    rng.set_stream(index as u64);
    rng
}
