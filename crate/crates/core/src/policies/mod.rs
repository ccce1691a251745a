//! Decentralized scheduling policies.
//!
//! Each source runs its own [`SourceAgent`]: a decision in slot `t` depends
//! only on the source index, `t`, the source's own estimator and age, and the
//! source's own random stream.

mod estimator;
pub mod select;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use estimator::EstimatorState;
pub use select::{
    aoi_threshold, decide_dlf, decide_dlf_init, decide_dlf_strict, decide_dlts, decide_exploit,
    decide_iid, decide_oracle_rr, should_exploit, ucb_index,
};

use crate::instance::PolicyKind;
use crate::rng::{derive_stream, RngStreamSpec, Stream, StreamRole};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("channel {channel} has no observations at slot {t}; the initialization sweep did not cover it")]
    Uninitialized { channel: usize, t: usize },
}

/// Fairness rank `((m + t) mod M) + 1` for 0-based source `m`.
#[inline]
pub fn fairness_index(sources: usize, source: usize, t: usize) -> usize {
    (source + 1 + t) % sources + 1
}

/// What a source knows when it decides in slot `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolicyContext {
    pub sources: usize,
    /// 0-based source index.
    pub source: usize,
    /// Slot number, starting at 1.
    pub t: usize,
    /// 1-based fairness rank.
    pub k: usize,
    /// Own age at the start of the slot.
    pub aoi_prev: u32,
}

impl PolicyContext {
    pub fn new(sources: usize, source: usize, t: usize, aoi_prev: u32) -> Self {
        Self {
            sources,
            source,
            t,
            k: fairness_index(sources, source, t),
            aoi_prev,
        }
    }
}

/// How the `mn` factor of the hybrid switch is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum HybridMn {
    /// `M * N`, the same for every source.
    #[default]
    #[serde(rename = "product_MN")]
    ProductMN,
    /// `m * N` with the 1-based source index `m`.
    #[serde(rename = "source_m_times_N")]
    SourceMTimesN,
}

/// Probability that the hybrid policies take the DLF branch in slot `t`:
/// `min{1, mn ln t / t}`.
pub fn hybrid_probability(ctx: &PolicyContext, channels: usize, rule: HybridMn) -> f64 {
    let factor = match rule {
        HybridMn::ProductMN => ctx.sources * channels,
        HybridMn::SourceMTimesN => (ctx.source + 1) * channels,
    } as f64;
    let t = ctx.t as f64;
    (factor * t.ln() / t).min(1.0)
}

/// The switch draw `E(t)`: `true` selects the DLF branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HybridSwitch {
    pub p_dlf: f64,
    pub use_dlf: bool,
}

impl HybridSwitch {
    pub fn draw<R: Rng + ?Sized>(
        ctx: &PolicyContext,
        channels: usize,
        rule: HybridMn,
        rng: &mut R,
    ) -> Self {
        let p_dlf = hybrid_probability(ctx, channels, rule);
        // p = 0 at t = 1; skip the draw so the stream is not consumed
        let use_dlf = p_dlf >= 1.0 || (p_dlf > 0.0 && rng.random::<f64>() < p_dlf);
        Self { p_dlf, use_dlf }
    }
}

/// DLH: the switch picks DLF (with its sweep while `t <= N`) or DL-TS.
pub fn decide_dlh<R: Rng + ?Sized>(
    ctx: &PolicyContext,
    est: &EstimatorState,
    rule: HybridMn,
    switch_rng: &mut R,
    sample_rng: &mut R,
) -> usize {
    let n = est.channels();
    if HybridSwitch::draw(ctx, n, rule, switch_rng).use_dlf {
        dlf_or_sweep(ctx, est)
    } else {
        decide_dlts(ctx, est, sample_rng)
    }
}

/// Base policy wrapped by an AoI-aware variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AwareBase {
    Dlf,
    Dlts,
    Dlh(HybridMn),
}

/// AoI-aware selection: exploit the `k`-th best empirical channel when the
/// source's age exceeds [`aoi_threshold`], otherwise defer to the base policy.
/// The DLF sweep in slots `t <= N` runs unconditionally.
pub fn decide_aa<R: Rng + ?Sized>(
    ctx: &PolicyContext,
    est: &EstimatorState,
    base: AwareBase,
    rng: &mut R,
) -> usize {
    let n = est.channels();
    let dlf_branch = match base {
        AwareBase::Dlf => true,
        AwareBase::Dlts => false,
        AwareBase::Dlh(rule) => HybridSwitch::draw(ctx, n, rule, rng).use_dlf,
    };
    if dlf_branch && ctx.t <= n {
        return decide_dlf_init(ctx, n);
    }
    if should_exploit(ctx, est) {
        return decide_exploit(ctx, est);
    }
    if dlf_branch {
        decide_dlf(ctx, est)
    } else {
        decide_dlts(ctx, est, rng)
    }
}

fn dlf_or_sweep(ctx: &PolicyContext, est: &EstimatorState) -> usize {
    if ctx.t <= est.channels() {
        decide_dlf_init(ctx, est.channels())
    } else {
        decide_dlf(ctx, est)
    }
}

/// The scheduler run by one source.
#[derive(Debug, Clone)]
pub struct SourceAgent {
    kind: PolicyKind,
    sources: usize,
    source: usize,
    est: EstimatorState,
    rng: Stream,
    hybrid: HybridMn,
    seed: u64,
    iteration: u64,
}

impl SourceAgent {
    /// Agent for `source` in run `iteration`; its randomness comes from the
    /// policy-sampling stream keyed by `(seed, iteration, source)`.
    pub fn new(
        kind: PolicyKind,
        sources: usize,
        channels: usize,
        source: usize,
        hybrid: HybridMn,
        seed: u64,
        iteration: u64,
    ) -> Self {
        let spec = RngStreamSpec::new(seed, iteration, StreamRole::PolicySampling)
            .with_lane(source as u64);
        Self {
            kind,
            sources,
            source,
            est: EstimatorState::new(channels),
            rng: derive_stream(spec),
            hybrid,
            seed,
            iteration,
        }
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn estimator(&self) -> &EstimatorState {
        &self.est
    }

    pub fn decide(&mut self, t: usize, aoi_prev: u32) -> Result<usize, PolicyError> {
        let ctx = PolicyContext::new(self.sources, self.source, t, aoi_prev);
        let n = self.est.channels();
        let choice = match self.kind {
            PolicyKind::OracleRR => decide_oracle_rr(&ctx),
            PolicyKind::IID => {
                let spec = RngStreamSpec::new(self.seed, self.iteration, StreamRole::IidPermutation)
                    .with_lane(t as u64);
                decide_iid(&ctx, &mut derive_stream(spec))
            }
            PolicyKind::DLF if t <= n => decide_dlf_init(&ctx, n),
            PolicyKind::DLF => decide_dlf_strict(&ctx, &self.est)?,
            PolicyKind::DLTS => decide_dlts(&ctx, &self.est, &mut self.rng),
            PolicyKind::DLH => {
                let rng = &mut self.rng;
                if HybridSwitch::draw(&ctx, n, self.hybrid, rng).use_dlf {
                    dlf_or_sweep(&ctx, &self.est)
                } else {
                    decide_dlts(&ctx, &self.est, rng)
                }
            }
            PolicyKind::DlfAa => decide_aa(&ctx, &self.est, AwareBase::Dlf, &mut self.rng),
            PolicyKind::DltsAa => decide_aa(&ctx, &self.est, AwareBase::Dlts, &mut self.rng),
            PolicyKind::DlhAa => {
                decide_aa(&ctx, &self.est, AwareBase::Dlh(self.hybrid), &mut self.rng)
            }
        };
        Ok(choice)
    }

    pub fn observe(&mut self, chosen: usize, acquired: bool, success: bool) {
        self.est.observe(chosen, acquired, success);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> Stream {
        derive_stream(RngStreamSpec::new(seed, 0, StreamRole::PolicySampling))
    }

    #[test]
    fn fairness_index_cycles() {
        for m in 1..6 {
            for src in 0..m {
                for start in 1..20 {
                    let mut ks: Vec<usize> =
                        (start..start + m).map(|t| fairness_index(m, src, t)).collect();
                    ks.sort();
                    assert_eq!(ks, (1..=m).collect::<Vec<_>>());
                }
            }
        }
    }

    #[test]
    fn hybrid_probabilities() {
        let ctx = |t| PolicyContext::new(2, 0, t, 1);
        assert_eq!(hybrid_probability(&ctx(1), 4, HybridMn::ProductMN), 0.0);
        assert_eq!(hybrid_probability(&ctx(10), 4, HybridMn::ProductMN), 1.0);
        let p = hybrid_probability(&ctx(20_000), 4, HybridMn::ProductMN);
        assert!((p - 8.0 * 20_000f64.ln() / 20_000.0).abs() < 1e-15);
        assert!((p - 0.00396).abs() < 1e-5);
        let p1 = hybrid_probability(&ctx(20_000), 4, HybridMn::SourceMTimesN);
        assert!((p1 - p / 2.0).abs() < 1e-15);
    }

    #[test]
    fn dlh_slot_one_is_thompson() {
        let est = EstimatorState::from_counts(&[(0, 0), (0, 0), (0, 0), (0, 0)]);
        let ctx = PolicyContext::new(2, 0, 1, 1);
        let mut a = rng(4);
        let mut b = rng(5);
        let mut reference_sample = rng(5);
        let via_dlh = decide_dlh(&ctx, &est, HybridMn::ProductMN, &mut a, &mut b);
        assert_eq!(via_dlh, decide_dlts(&ctx, &est, &mut reference_sample));
    }

    #[test]
    fn dlh_early_slots_use_dlf() {
        let est = EstimatorState::new(4);
        let ctx = PolicyContext::new(2, 0, 3, 1);
        let mut a = rng(1);
        let mut b = rng(2);
        for _ in 0..50 {
            assert_eq!(
                decide_dlh(&ctx, &est, HybridMn::ProductMN, &mut a, &mut b),
                decide_dlf_init(&ctx, 4)
            );
        }
    }

    #[test]
    fn aa_explores_at_low_age() {
        let est = EstimatorState::from_counts(&[(8, 10), (7, 10), (1, 10), (1, 10)]);
        let ctx = PolicyContext {
            sources: 2,
            source: 0,
            t: 30,
            k: 2,
            aoi_prev: 1,
        };
        let dlf = decide_aa(&ctx, &est, AwareBase::Dlf, &mut rng(0));
        assert_eq!(dlf, decide_dlf(&ctx, &est));
        let high = PolicyContext { aoi_prev: 10, ..ctx };
        for base in [AwareBase::Dlf, AwareBase::Dlts, AwareBase::Dlh(HybridMn::ProductMN)] {
            assert_eq!(decide_aa(&high, &est, base, &mut rng(0)), 1);
        }
    }

    #[test]
    fn dlh_aa_first_slot_samples() {
        let est = EstimatorState::new(4);
        let ctx = PolicyContext::new(2, 0, 1, 1);
        let mut r = rng(9);
        let mut reference = rng(9);
        let got = decide_aa(&ctx, &est, AwareBase::Dlh(HybridMn::ProductMN), &mut r);
        assert_eq!(got, decide_dlts(&ctx, &est, &mut reference));
    }

    #[test]
    fn dlf_aa_sweep_ignores_age() {
        let est = EstimatorState::new(4);
        let ctx = PolicyContext::new(2, 1, 2, 50);
        assert_eq!(
            decide_aa(&ctx, &est, AwareBase::Dlf, &mut rng(0)),
            decide_dlf_init(&ctx, 4)
        );
    }

    #[test]
    fn agents_are_deterministic_per_stream() {
        for kind in PolicyKind::ALL {
            let run = || {
                let mut agent = SourceAgent::new(kind, 2, 4, 1, HybridMn::ProductMN, 3, 7);
                (1..200)
                    .map(|t| {
                        let c = agent.decide(t, (t % 5) as u32 + 1).unwrap();
                        agent.observe(c, kind == PolicyKind::DLF || t % 3 != 0, t % 2 == 0);
                        c
                    })
                    .collect::<Vec<_>>()
            };
            assert_eq!(run(), run(), "{kind}");
        }
    }
}
