//! Fixtures shared by the simulator benchmarks.

use aoi_core::{ChannelTape, ProblemInstance, RunSeeds};

/// Two sources on four channels.
pub fn small_instance() -> ProblemInstance {
    ProblemInstance::new(2, 4, &[0.8, 0.75, 0.7, 0.65]).expect("valid instance")
}

/// Four sources on seven channels.
pub fn large_instance() -> ProblemInstance {
    ProblemInstance::new(4, 7, &[0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5]).expect("valid instance")
}

pub fn tape(instance: &ProblemInstance, horizon: usize) -> (RunSeeds, ChannelTape) {
    let seeds = RunSeeds::new(7, 0);
    let tape = seeds.tape(instance, horizon);
    (seeds, tape)
}
