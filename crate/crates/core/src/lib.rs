//! Decentralized age-of-information bandits over collision channels.
//!
//! `M` sources each pick one of `N` Bernoulli channels per slot without
//! communicating. A source's age resets to 1 after a delivered update and
//! grows by one otherwise. Policies are scored by cumulative age regret
//! against the collision-free round-robin schedule on the best `M` channels.

pub mod env;
pub mod experiment;
pub mod instance;
pub mod metrics;
pub mod policies;
pub mod rng;
pub mod sim;
pub mod verify;

pub use env::{oracle_schedule, AoIState, ChannelTape, EnvError, Resolver, SlotOutcome, SourceOutcome};
pub use experiment::{
    run_experiment, sweep, ExperimentConfig, ExperimentError, ExperimentResult, InstanceSpec, SweepAxis,
    SweepRow,
};
pub use instance::{equidistant_mu, InstanceError, PolicyKind, ProblemInstance};
pub use metrics::{
    pull_table, regret, theorem5_bound, BoundTerms, MetricsError, RegretCurve, RunTrace,
};
pub use policies::{fairness_index, HybridMn, PolicyContext, PolicyError, SourceAgent};
pub use rng::{derive_stream, RngStreamSpec, Stream, StreamRole};
pub use sim::{run_policy, RunSeeds, SimError};
pub use verify::{
    check_iid_optimum, compare_rr_iid, enumerate_symmetric_policies, expected_aoi_schedule, run_verification,
    ScheduleMatrix, VerificationReport, VerifyError,
};
