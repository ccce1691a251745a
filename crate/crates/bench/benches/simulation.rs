use aoi_bench::{large_instance, small_instance, tape};
use aoi_core::policies::{decide_dlts, EstimatorState, PolicyContext};
use aoi_core::{run_policy, HybridMn, PolicyKind};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use std::hint::black_box;

fn bench_policies(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_policy_T2000");
    for (label, instance) in [("2x4", small_instance()), ("4x7", large_instance())] {
        let (seeds, tape) = tape(&instance, 2000);
        for kind in PolicyKind::ALL {
            group.bench_with_input(BenchmarkId::new(kind.name(), label), &kind, |b, &kind| {
                b.iter(|| run_policy(&instance, &tape, kind, HybridMn::ProductMN, seeds).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_posterior(c: &mut Criterion) {
    let est = EstimatorState::from_counts(&[(80, 100), (70, 100), (60, 100), (50, 100), (40, 100), (30, 100), (20, 100)]);
    let ctx = PolicyContext::new(4, 1, 500, 1);
    let mut rng = aoi_core::Stream::seed_from_u64(3);
    c.bench_function("decide_dlts_N7", |b| b.iter(|| decide_dlts(black_box(&ctx), &est, &mut rng)));
}

criterion_group!(benches, bench_policies, bench_posterior);
criterion_main!(benches);
