//! Keyed random streams.
//!
//! Every random draw in a simulation comes from a [`RandomStream`] whose
//! state is a pure function of `(seed, agent, round, purpose)`. The key is
//! written directly into a ChaCha8 seed, so two streams share output only if
//! they share the whole key, and a stream reproduces bitwise no matter which
//! thread constructs it or in what order agents are processed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Distinct purposes of the same agent and round
/// never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    /// Mini-batch indices for the local training steps of one round.
    Batch,
    /// The broadcast compression of the primal message.
    CompressX,
    /// The compression of the dual message for one directed edge.
    CompressZ { neighbor: usize },
    /// Free-form tag for tests and tools.
    Custom(u32),
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Batch => 1 << 32,
            Purpose::CompressX => 2 << 32,
            Purpose::CompressZ { neighbor } => (3 << 32) | (neighbor as u64 & 0xffff_ffff),
            Purpose::Custom(tag) => (4 << 32) | u64::from(tag),
        }
    }
}

/// Full key of a stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub agent: usize,
    pub round: u64,
    pub purpose: Purpose,
}

#[derive(Debug, Clone)]
pub struct RandomStream {
    key: StreamKey,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, agent: usize, round: u64, purpose: Purpose) -> Self {
        Self::from_key(StreamKey {
            seed,
            agent,
            round,
            purpose,
        })
    }

    pub fn from_key(key: StreamKey) -> Self {
        let words = [key.seed, key.agent as u64, key.round, key.purpose.code()];
        let mut bytes = [0u8; 32];
        for (chunk, word) in bytes.chunks_exact_mut(8).zip(words) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        Self {
            key,
            rng: ChaCha8Rng::from_seed(bytes),
        }
    }

    pub fn key(&self) -> StreamKey {
        self.key
    }

    /// Uniform draw on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer on `[0, upper)`.
    pub fn below(&mut self, upper: usize) -> usize {
        self.rng.random_range(0..upper)
    }

    /// Uniformly random `amount`-subset of `0..length`, without replacement.
    /// The order of the returned indices is the sampling order.
    pub fn subset(&mut self, length: usize, amount: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.rng, length, amount).into_vec()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
