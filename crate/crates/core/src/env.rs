//! The slotted multi-channel environment.
//!
//! Channel outcomes are pre-drawn into a [`ChannelTape`] so that a candidate
//! policy and the oracle can be run against identical channel randomness.
//! When several sources pick the same channel one of them, chosen uniformly
//! at random, acquires it and the rest observe nothing.

use rand::Rng;
use thiserror::Error;

use crate::instance::ProblemInstance;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EnvError {
    #[error("channel {channel} does not exist (N = {channels})")]
    ChannelOutOfRange { channel: usize, channels: usize },
    #[error("slot {slot} is outside the tape horizon 1..={horizon}")]
    SlotOutOfRange { slot: usize, horizon: usize },
    #[error("expected {expected} decisions, got {got}")]
    DecisionCount { expected: usize, got: usize },
}

/// Per-(channel, slot) transmission outcomes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelTape {
    channels: usize,
    horizon: usize,
    bits: Vec<bool>,
}

impl ChannelTape {
    /// Draws `outcome[n][t] ~ Bernoulli(mu[n])` independently, channel by
    /// channel.
    pub fn draw<R: Rng + ?Sized>(mu: &[f64], horizon: usize, rng: &mut R) -> Self {
        let mut bits = Vec::with_capacity(mu.len() * horizon);
        for &p in mu {
            bits.extend((0..horizon).map(|_| rng.random::<f64>() < p));
        }
        Self {
            channels: mu.len(),
            horizon,
            bits,
        }
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let horizon = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == horizon), "ragged tape");
        Self {
            channels: rows.len(),
            horizon,
            bits: rows.concat(),
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Outcome on `channel` in slot `t` (slots are numbered from 1).
    #[inline]
    pub fn success(&self, channel: usize, t: usize) -> bool {
        self.bits[channel * self.horizon + (t - 1)]
    }

    pub fn row(&self, channel: usize) -> &[bool] {
        &self.bits[channel * self.horizon..(channel + 1) * self.horizon]
    }
}

pub fn make_tape<R: Rng + ?Sized>(
    instance: &ProblemInstance,
    horizon: usize,
    rng: &mut R,
) -> ChannelTape {
    ChannelTape::draw(instance.mu(), horizon, rng)
}

/// Age of information of every source at the current slot boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AoIState {
    ages: Vec<u32>,
}

impl AoIState {
    /// Every source starts with age 1.
    pub fn new(sources: usize) -> Self {
        Self {
            ages: vec![1; sources],
        }
    }

    pub fn from_ages(ages: Vec<u32>) -> Self {
        assert!(ages.iter().all(|&a| a >= 1), "ages start at 1");
        Self { ages }
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn age(&self, source: usize) -> u32 {
        self.ages[source]
    }

    #[inline]
    fn advance(&mut self, source: usize, success: bool) {
        let a = &mut self.ages[source];
        *a = if success { 1 } else { *a + 1 };
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceOutcome {
    pub chosen: usize,
    pub acquired: bool,
    pub success: bool,
    pub collided: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SlotOutcome {
    pub sources: Vec<SourceOutcome>,
    /// Channels chosen by two or more sources in this slot.
    pub contested_channels: usize,
}

/// Collision resolution with reusable scratch space.
#[derive(Debug, Clone)]
pub struct Resolver {
    load: Vec<u32>,
    contenders: Vec<usize>,
    outcome: SlotOutcome,
}

impl Resolver {
    pub fn new(sources: usize, channels: usize) -> Self {
        Self {
            load: vec![0; channels],
            contenders: Vec::with_capacity(sources),
            outcome: SlotOutcome {
                sources: vec![SourceOutcome::default(); sources],
                contested_channels: 0,
            },
        }
    }

    /// Resolves one slot and advances the ages. Contested channels are
    /// resolved in ascending channel order, one uniform draw from `rng` each.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        decisions: &[usize],
        tape: &ChannelTape,
        t: usize,
        aoi: &mut AoIState,
        rng: &mut R,
    ) -> Result<&SlotOutcome, EnvError> {
        let sources = self.outcome.sources.len();
        let channels = self.load.len();
        if decisions.len() != sources || aoi.ages.len() != sources {
            return Err(EnvError::DecisionCount {
                expected: sources,
                got: decisions.len(),
            });
        }
        if t == 0 || t > tape.horizon() {
            return Err(EnvError::SlotOutOfRange {
                slot: t,
                horizon: tape.horizon(),
            });
        }
        self.load.iter_mut().for_each(|l| *l = 0);
        for &channel in decisions {
            if channel >= channels || channel >= tape.channels() {
                return Err(EnvError::ChannelOutOfRange { channel, channels });
            }
            self.load[channel] += 1;
        }

        for (m, &channel) in decisions.iter().enumerate() {
            let collided = self.load[channel] >= 2;
            self.outcome.sources[m] = SourceOutcome {
                chosen: channel,
                acquired: !collided,
                success: false,
                collided,
            };
        }
        let mut contested = 0;
        for channel in 0..channels {
            if self.load[channel] < 2 {
                continue;
            }
            contested += 1;
            self.contenders.clear();
            self.contenders
                .extend((0..sources).filter(|&m| decisions[m] == channel));
            let winner = self.contenders[rng.random_range(0..self.contenders.len())];
            self.outcome.sources[winner].acquired = true;
        }
        self.outcome.contested_channels = contested;

        for m in 0..sources {
            let o = &mut self.outcome.sources[m];
            o.success = o.acquired && tape.success(o.chosen, t);
            aoi.advance(m, o.success);
        }
        Ok(&self.outcome)
    }
}

/// Resolves collisions for slot `t` against the tape and advances the ages.
pub fn resolve_and_step<R: Rng + ?Sized>(
    decisions: &[usize],
    tape: &ChannelTape,
    t: usize,
    aoi: &mut AoIState,
    collision_rng: &mut R,
) -> Result<SlotOutcome, EnvError> {
    let mut resolver = Resolver::new(decisions.len(), tape.channels());
    resolver
        .step(decisions, tape, t, aoi, collision_rng)
        .cloned()
}

/// Round-robin oracle: source `m` (0-based) in slot `t` uses best-`M` channel
/// `(m + 1 + t) mod M`, the 0-based form of `((m + t) mod M) + 1`.
#[inline]
pub fn oracle_schedule(sources: usize, m: usize, t: usize) -> usize {
    (m + 1 + t) % sources
}
