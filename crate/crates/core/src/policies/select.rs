//! Per-slot channel selection rules.
//!
//! Order statistics use a total order on channels: larger value first, and
//! among equal values the lower channel index first. "k-th largest" is the
//! k-th channel in that order; an argmin over a set is the last member of the
//! set in that order.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Distribution};

use super::{EstimatorState, PolicyContext, PolicyError};
use crate::env::oracle_schedule;

/// Position (0-based) of channel `i` in the descending order of `values`.
#[inline]
fn descending_rank(values: &[f64], i: usize) -> usize {
    let v = values[i];
    values
        .iter()
        .enumerate()
        .filter(|&(j, &w)| w > v || (w == v && j < i))
        .count()
}

/// Channel holding the `k`-th largest value (`k` is 1-based).
pub fn kth_largest(values: &[f64], k: usize) -> usize {
    debug_assert!(k >= 1 && k <= values.len());
    (0..values.len())
        .find(|&i| descending_rank(values, i) == k - 1)
        .expect("ranks form a permutation")
}

pub fn decide_oracle_rr(ctx: &PolicyContext) -> usize {
    oracle_schedule(ctx.sources, ctx.source, ctx.t)
}

/// Source `m` takes the `m`-th entry of a uniform permutation of the best-`M`
/// channels. All sources of a run must pass streams derived from the same
/// per-slot key so they see the same permutation.
pub fn decide_iid<R: Rng + ?Sized>(ctx: &PolicyContext, perm_rng: &mut R) -> usize {
    let mut perm: Vec<usize> = (0..ctx.sources).collect();
    perm.shuffle(perm_rng);
    perm[ctx.source]
}

/// Initialization sweep: in slot `t <= N` source `m` plays
/// `(m + 1 + t) mod N`, so every source visits each channel once without
/// colliding.
pub fn decide_dlf_init(ctx: &PolicyContext, channels: usize) -> usize {
    (ctx.source + 1 + ctx.t) % channels
}

#[inline]
fn confidence_radius(t: usize, plays: u64) -> f64 {
    if plays == 0 {
        f64::INFINITY
    } else {
        (2.0 * (t as f64).ln() / plays as f64).sqrt()
    }
}

/// UCB index `mu_hat + sqrt(2 ln t / T)`.
pub fn ucb_index(est: &EstimatorState, n: usize, t: usize) -> f64 {
    est.mu_hat(n) + confidence_radius(t, est.plays(n))
}

/// DLF: among the `k` channels with the largest UCB index, play the one with
/// the smallest lower confidence bound.
///
/// An unplayed channel has an infinite radius. That only happens when DLF is
/// entered from a hybrid policy; a plain DLF run reports it as
/// [`PolicyError::Uninitialized`] through [`decide_dlf_strict`].
pub fn decide_dlf(ctx: &PolicyContext, est: &EstimatorState) -> usize {
    let n = est.channels();
    let mut ucb = [0.0f64; MAX_CHANNELS];
    let mut lcb = [0.0f64; MAX_CHANNELS];
    assert!(n <= MAX_CHANNELS, "at most {MAX_CHANNELS} channels");
    for c in 0..n {
        let mean = est.mu_hat(c);
        let r = confidence_radius(ctx.t, est.plays(c));
        ucb[c] = mean + r;
        lcb[c] = mean - r;
    }
    let ucb = &ucb[..n];
    let mut best = usize::MAX;
    let mut best_lcb = f64::INFINITY;
    for (c, &l) in lcb[..n].iter().enumerate() {
        if descending_rank(ucb, c) >= ctx.k {
            continue;
        }
        if best == usize::MAX || l <= best_lcb {
            best = c;
            best_lcb = l;
        }
    }
    best
}

pub fn decide_dlf_strict(ctx: &PolicyContext, est: &EstimatorState) -> Result<usize, PolicyError> {
    if let Some(channel) = (0..est.channels()).find(|&c| est.plays(c) == 0) {
        return Err(PolicyError::Uninitialized { channel, t: ctx.t });
    }
    Ok(decide_dlf(ctx, est))
}

/// Draws `theta_n ~ Beta(alpha_n, beta_n)` into `theta`.
pub fn sample_posterior<R: Rng + ?Sized>(est: &EstimatorState, rng: &mut R, theta: &mut [f64]) {
    for (n, slot) in theta.iter_mut().enumerate().take(est.channels()) {
        let dist = Beta::new(est.alpha(n), est.beta(n)).expect("alpha, beta >= 1");
        *slot = dist.sample(rng);
    }
}

/// DL-TS: the channel with the `k`-th largest posterior sample.
pub fn decide_dlts<R: Rng + ?Sized>(ctx: &PolicyContext, est: &EstimatorState, rng: &mut R) -> usize {
    let n = est.channels();
    let mut theta = [0.0f64; MAX_CHANNELS];
    assert!(n <= MAX_CHANNELS, "at most {MAX_CHANNELS} channels");
    sample_posterior(est, rng, &mut theta[..n]);
    kth_largest(&theta[..n], ctx.k)
}

/// Dynamic age threshold: the `k`-th smallest `(alpha + beta) / alpha`.
pub fn aoi_threshold(ctx: &PolicyContext, est: &EstimatorState) -> f64 {
    let n = est.channels();
    let mut ratios = [0.0f64; MAX_CHANNELS];
    assert!(n <= MAX_CHANNELS, "at most {MAX_CHANNELS} channels");
    for (c, r) in ratios.iter_mut().enumerate().take(n) {
        *r = est.age_ratio(c);
    }
    let ratios = &mut ratios[..n];
    ratios.sort_by(f64::total_cmp);
    ratios[ctx.k - 1]
}

/// Exploit step of the AoI-aware policies: the `k`-th best channel by
/// empirical success rate.
pub fn decide_exploit(ctx: &PolicyContext, est: &EstimatorState) -> usize {
    let n = est.channels();
    let mut means = [0.0f64; MAX_CHANNELS];
    assert!(n <= MAX_CHANNELS, "at most {MAX_CHANNELS} channels");
    for (c, m) in means.iter_mut().enumerate().take(n) {
        *m = est.mu_hat(c);
    }
    kth_largest(&means[..n], ctx.k)
}

/// Whether an AoI-aware policy should exploit in this slot.
pub fn should_exploit(ctx: &PolicyContext, est: &EstimatorState) -> bool {
    f64::from(ctx.aoi_prev) > aoi_threshold(ctx, est)
}

/// Upper bound on `N` for the stack buffers used by the selection rules.
pub const MAX_CHANNELS: usize = 64;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, RngStreamSpec, StreamRole};
    use proptest::prelude::*;

    fn ctx(sources: usize, source: usize, t: usize) -> PolicyContext {
        PolicyContext::new(sources, source, t, 1)
    }

    fn ctx_k(k: usize, t: usize) -> PolicyContext {
        PolicyContext {
            sources: 8,
            source: 0,
            t,
            k,
            aoi_prev: 1,
        }
    }

    fn rng(seed: u64) -> crate::rng::Stream {
        derive_stream(RngStreamSpec::new(seed, 0, StreamRole::PolicySampling))
    }

    #[test]
    fn ucb_index_value() {
        let est = EstimatorState::from_counts(&[(5, 10)]);
        let expected = 0.5 + (2.0 * 100f64.ln() / 10.0).sqrt();
        assert!((ucb_index(&est, 0, 100) - expected).abs() < 1e-12);
        assert!((ucb_index(&est, 0, 100) - 1.4597).abs() < 1e-4);
    }

    #[test]
    fn dlf_k1_is_ucb_argmax() {
        let est = EstimatorState::from_counts(&[(5, 10), (30, 40), (1, 2), (20, 30)]);
        let t = 100;
        let ucb: Vec<f64> = (0..4).map(|n| ucb_index(&est, n, t)).collect();
        let argmax = (0..4).max_by(|&a, &b| ucb[a].total_cmp(&ucb[b])).unwrap();
        assert_eq!(decide_dlf(&ctx_k(1, t), &est), argmax);
    }

    #[test]
    fn dlf_ties_resolve_by_rank() {
        let est = EstimatorState::from_counts(&[(3, 6); 4]);
        assert_eq!(decide_dlf(&ctx_k(1, 50), &est), 0);
        assert_eq!(decide_dlf(&ctx_k(2, 50), &est), 1);
        assert_eq!(decide_dlf(&ctx_k(3, 50), &est), 2);
    }

    #[test]
    fn dlf_strict_rejects_unplayed() {
        let est = EstimatorState::from_counts(&[(3, 6), (0, 0)]);
        assert_eq!(
            decide_dlf_strict(&ctx_k(1, 10), &est),
            Err(PolicyError::Uninitialized { channel: 1, t: 10 })
        );
    }

    #[test]
    fn dlf_prefers_unplayed_when_optimistic() {
        let est = EstimatorState::from_counts(&[(9, 10), (0, 0)]);
        assert_eq!(decide_dlf(&ctx_k(1, 10), &est), 1);
    }

    #[test]
    fn dlf_init_sweep() {
        let visits: Vec<usize> = (1..=4).map(|t| decide_dlf_init(&ctx(2, 0, t), 4)).collect();
        assert_eq!(visits, vec![2, 3, 0, 1]);
        assert!((1..=3).all(|t| decide_dlf_init(&ctx(1, 0, t), 1) == 0));
    }

    #[test]
    fn iid_marginal_is_uniform() {
        let slots = 100_000;
        let mut hits = 0;
        for t in 1..=slots {
            let spec = RngStreamSpec::new(11, 0, StreamRole::IidPermutation).with_lane(t as u64);
            let mut a = derive_stream(spec);
            let mut b = derive_stream(spec);
            let c0 = decide_iid(&ctx(2, 0, t), &mut a);
            let c1 = decide_iid(&ctx(2, 1, t), &mut b);
            assert_ne!(c0, c1);
            hits += usize::from(c0 == 0);
        }
        let p = hits as f64 / slots as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / slots as f64).sqrt(), "p = {p}");
    }

    #[test]
    fn iid_single_source() {
        let mut r = rng(0);
        assert!((1..20).all(|t| decide_iid(&ctx(1, 0, t), &mut r) == 0));
    }

    #[test]
    fn dlts_fresh_prior_is_uniform_over_channels() {
        let est = EstimatorState::new(3);
        let mut r = rng(2);
        let draws = 30_000;
        let mut counts = [0usize; 3];
        for _ in 0..draws {
            counts[decide_dlts(&ctx_k(2, 1), &est, &mut r)] += 1;
        }
        let p = 1.0 / 3.0;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 4.0 * se, "{counts:?}");
        }
    }

    #[test]
    fn dlts_concentrated_posterior() {
        let est = EstimatorState::from_counts(&[(1_000_000, 1_000_000), (0, 1_000_000), (0, 1_000_000)]);
        let mut r = rng(3);
        assert!((0..1000).all(|_| decide_dlts(&ctx_k(1, 5), &est, &mut r) == 0));
        // channel 1 sits far below the others; k = N selects it.
        let est = EstimatorState::from_counts(&[(500, 1000), (0, 100_000), (600, 1000)]);
        let hits = (0..1000).filter(|_| decide_dlts(&ctx_k(3, 5), &est, &mut r) == 1).count();
        assert_eq!(hits, 1000);
    }

    #[test]
    fn thresholds() {
        let est = EstimatorState::new(4);
        for k in 1..=4 {
            assert_eq!(aoi_threshold(&ctx_k(k, 3), &est), 2.0);
        }
        // (alpha, beta) = (4, 1), (9, 3), (1, 1): ratios 1.25, 1.333.., 2
        let est = EstimatorState::from_counts(&[(3, 3), (8, 10), (0, 0)]);
        assert!((aoi_threshold(&ctx_k(2, 3), &est) - 12.0 / 9.0).abs() < 1e-12);
        assert_eq!(aoi_threshold(&ctx_k(1, 3), &est), 1.25);
        let est = EstimatorState::from_counts(&[(8000, 10_000), (10, 100)]);
        let lim = aoi_threshold(&ctx_k(1, 3), &est);
        assert!((lim - 1.0 / 0.8).abs() < 1e-3);
    }

    #[test]
    fn exploit_picks_kth_mean() {
        let est = EstimatorState::from_counts(&[(8, 10), (7, 10), (1, 10), (1, 10)]);
        let mut c = ctx_k(2, 20);
        c.aoi_prev = 10;
        assert!(should_exploit(&c, &est));
        assert_eq!(decide_exploit(&c, &est), 1);
        c.aoi_prev = 1;
        assert!(!should_exploit(&c, &EstimatorState::new(4)));
    }

    proptest! {
        #[test]
        fn kth_largest_matches_sort(values in proptest::collection::vec(0u8..5, 1..8), k_seed in any::<usize>()) {
            let values: Vec<f64> = values.into_iter().map(f64::from).collect();
            let k = k_seed % values.len() + 1;
            let mut order: Vec<usize> = (0..values.len()).collect();
            order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
            prop_assert_eq!(kth_largest(&values, k), order[k - 1]);
        }

        #[test]
        fn dlf_ranks_are_distinct_on_separated_stats(
            m in 1usize..5,
            extra in 0usize..3,
            t in 50usize..5000,
        ) {
            // Widely separated means with huge counts: UCB and LCB orders agree.
            let n = m + extra;
            let counts: Vec<(u64, u64)> = (0..n).map(|c| (1_000_000 * (n - c) as u64 / (n as u64 + 1), 1_000_000)).collect();
            let est = EstimatorState::from_counts(&counts);
            let mut picks: Vec<usize> = (1..=m).map(|k| decide_dlf(&ctx_k(k, t), &est)).collect();
            picks.sort();
            picks.dedup();
            prop_assert_eq!(picks.len(), m);
        }

        #[test]
        fn high_age_forces_exploit(counts in proptest::collection::vec((0u64..50, 0u64..50), 1..6), k_seed in any::<usize>()) {
            let counts: Vec<(u64, u64)> = counts.into_iter().map(|(a, b)| (a.min(b), a.max(b))).collect();
            let est = EstimatorState::from_counts(&counts);
            let n = counts.len();
            let max_ratio = (0..n).map(|c| est.age_ratio(c)).fold(0.0, f64::max);
            let mut c = ctx_k(k_seed % n + 1, 10);
            c.aoi_prev = max_ratio.floor() as u32 + 1;
            prop_assert!(should_exploit(&c, &est));
        }
    }
}
