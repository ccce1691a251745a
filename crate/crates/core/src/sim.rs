//! One policy run over a channel tape.

use crate::env::{AoIState, ChannelTape, EnvError, Resolver};
use crate::instance::{PolicyKind, ProblemInstance};
use crate::metrics::RunTrace;
use crate::policies::{HybridMn, PolicyError, SourceAgent};
use crate::rng::{derive_stream, RngStreamSpec, StreamRole};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

/// Keys for every random stream a run consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub master_seed: u64,
    pub iteration: u64,
}

impl RunSeeds {
    pub fn new(master_seed: u64, iteration: u64) -> Self {
        Self {
            master_seed,
            iteration,
        }
    }

    pub fn tape(&self, instance: &ProblemInstance, horizon: usize) -> ChannelTape {
        let spec = RngStreamSpec::new(self.master_seed, self.iteration, StreamRole::ChannelTape);
        crate::env::make_tape(instance, horizon, &mut derive_stream(spec))
    }
}

/// Runs `kind` on every source for all slots of `tape`.
///
/// Each policy run restarts the collision-resolution stream of its iteration,
/// so collision draws do not depend on how many other policies were run.
pub fn run_policy(
    instance: &ProblemInstance,
    tape: &ChannelTape,
    kind: PolicyKind,
    hybrid: HybridMn,
    seeds: RunSeeds,
) -> Result<RunTrace, SimError> {
    let sources = instance.sources();
    let channels = instance.channels();
    let horizon = tape.horizon();
    let mut agents: Vec<SourceAgent> = (0..sources)
        .map(|m| {
            SourceAgent::new(
                kind,
                sources,
                channels,
                m,
                hybrid,
                seeds.master_seed,
                seeds.iteration,
            )
        })
        .collect();
    let mut collision_rng = derive_stream(RngStreamSpec::new(
        seeds.master_seed,
        seeds.iteration,
        StreamRole::CollisionResolution,
    ));
    let mut resolver = Resolver::new(sources, channels);
    let mut aoi = AoIState::new(sources);
    let mut trace = RunTrace::new(kind, sources, channels, horizon);
    let mut decisions = vec![0usize; sources];

    for t in 1..=horizon {
        for (m, agent) in agents.iter_mut().enumerate() {
            decisions[m] = agent.decide(t, aoi.age(m))?;
        }
        let outcome = resolver.step(&decisions, tape, t, &mut aoi, &mut collision_rng)?;
        for (agent, o) in agents.iter_mut().zip(&outcome.sources) {
            agent.observe(o.chosen, o.acquired, o.success);
        }
        trace.record(outcome, aoi.ages());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig2a() -> ProblemInstance {
        ProblemInstance::new(2, 4, &[0.8, 0.75, 0.7, 0.65]).unwrap()
    }

    #[test]
    fn oracle_never_collides_or_leaves_best_set() {
        let inst = fig2a();
        let seeds = RunSeeds::new(1, 0);
        let tape = seeds.tape(&inst, 500);
        let trace = run_policy(&inst, &tape, PolicyKind::OracleRR, HybridMn::ProductMN, seeds).unwrap();
        assert_eq!(trace.collisions, 0);
        for m in 0..2 {
            assert_eq!(trace.pulls[m], vec![250, 250, 0, 0]);
        }
    }

    #[test]
    fn age_rows_renew() {
        let inst = fig2a();
        let seeds = RunSeeds::new(2, 0);
        let tape = seeds.tape(&inst, 2000);
        for kind in PolicyKind::ALL {
            let trace = run_policy(&inst, &tape, kind, HybridMn::ProductMN, seeds).unwrap();
            for m in 0..2 {
                let row = trace.aoi_row(m);
                assert!(row[0] == 1 || row[0] == 2);
                assert!(row.windows(2).all(|w| w[1] == 1 || w[1] == w[0] + 1));
                assert_eq!(trace.pulls[m].iter().sum::<u64>(), 2000);
            }
        }
    }

    #[test]
    fn plain_dlf_never_hits_uninitialized() {
        let inst = ProblemInstance::new(3, 5, &[0.8, 0.75, 0.7, 0.65, 0.6]).unwrap();
        let seeds = RunSeeds::new(3, 1);
        let tape = seeds.tape(&inst, 3000);
        assert!(run_policy(&inst, &tape, PolicyKind::DLF, HybridMn::ProductMN, seeds).is_ok());
    }

    #[test]
    fn identical_decisions_give_identical_ages() {
        let inst = fig2a();
        let seeds = RunSeeds::new(4, 2);
        let tape = seeds.tape(&inst, 1000);
        let a = run_policy(&inst, &tape, PolicyKind::OracleRR, HybridMn::ProductMN, seeds).unwrap();
        let b = run_policy(&inst, &tape, PolicyKind::OracleRR, HybridMn::ProductMN, RunSeeds::new(99, 2)).unwrap();
        assert_eq!(a.aoi, b.aoi);
    }
}
