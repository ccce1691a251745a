//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator keyed by
//! `(master_seed, iteration, role, lane)`. Distinct keys give independent
//! streams; the same key always replays the same sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamRole {
    ChannelTape,
    CollisionResolution,
    /// Per-source policy randomness; `lane` is the source index.
    PolicySampling,
    /// Shared per-slot permutation of the IID policy; `lane` is the slot.
    IidPermutation,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::ChannelTape => 1,
            StreamRole::CollisionResolution => 2,
            StreamRole::PolicySampling => 3,
            StreamRole::IidPermutation => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStreamSpec {
    pub master_seed: u64,
    pub iteration: u64,
    pub role: StreamRole,
    pub lane: u64,
}

impl RngStreamSpec {
    pub fn new(master_seed: u64, iteration: u64, role: StreamRole) -> Self {
        Self {
            master_seed,
            iteration,
            role,
            lane: 0,
        }
    }

    pub fn with_lane(mut self, lane: u64) -> Self {
        self.lane = lane;
        self
    }
}

pub fn derive_stream(spec: RngStreamSpec) -> Stream {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&spec.master_seed.to_le_bytes());
    key[8..16].copy_from_slice(&spec.iteration.to_le_bytes());
    key[16..24].copy_from_slice(&spec.role.tag().to_le_bytes());
    key[24..].copy_from_slice(&spec.lane.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
