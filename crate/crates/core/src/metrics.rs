//! Regret, pull and collision accounting, and the analytical DLF regret bound.

use std::f64::consts::PI;

use thiserror::Error;

use crate::env::SlotOutcome;
use crate::instance::{PolicyKind, ProblemInstance};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("trace shapes differ: {0}")]
    LengthMismatch(String),
    #[error("no traces supplied")]
    NoTraces,
    #[error("the regret bound needs at least two sources")]
    SingleSource,
    #[error("the regret bound needs T > N (T = {horizon}, N = {channels})")]
    HorizonTooShort { horizon: usize, channels: usize },
    #[error("the best-M channels have no positive gap")]
    DegenerateGap,
}

/// Everything recorded during one policy run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunTrace {
    pub policy: PolicyKind,
    /// `aoi[m][t - 1]` is the age of source `m` after slot `t`.
    pub aoi: Vec<Vec<u32>>,
    /// `pulls[m][n]`: slots in which source `m` chose channel `n`.
    pub pulls: Vec<Vec<u64>>,
    /// Contested channel-slots: one per channel chosen by two or more sources.
    pub collisions: u64,
    /// Slots in which each source shared its channel with another source.
    pub collided_slots: Vec<u64>,
    /// Slots in which each source lost its channel to another source.
    pub lost_slots: Vec<u64>,
}

impl RunTrace {
    pub fn new(policy: PolicyKind, sources: usize, channels: usize, horizon: usize) -> Self {
        Self {
            policy,
            aoi: vec![Vec::with_capacity(horizon); sources],
            pulls: vec![vec![0; channels]; sources],
            collisions: 0,
            collided_slots: vec![0; sources],
            lost_slots: vec![0; sources],
        }
    }

    /// Test helper: a trace with the given ages and nothing else.
    pub fn from_ages(policy: PolicyKind, aoi: Vec<Vec<u32>>) -> Self {
        let sources = aoi.len();
        Self {
            policy,
            aoi,
            pulls: vec![Vec::new(); sources],
            collisions: 0,
            collided_slots: vec![0; sources],
            lost_slots: vec![0; sources],
        }
    }

    pub fn record(&mut self, outcome: &SlotOutcome, ages: &[u32]) {
        for (m, o) in outcome.sources.iter().enumerate() {
            self.pulls[m][o.chosen] += 1;
            self.collided_slots[m] += u64::from(o.collided);
            self.lost_slots[m] += u64::from(!o.acquired);
            self.aoi[m].push(ages[m]);
        }
        self.collisions += outcome.contested_channels as u64;
    }

    pub fn sources(&self) -> usize {
        self.aoi.len()
    }

    pub fn horizon(&self) -> usize {
        self.aoi.first().map_or(0, Vec::len)
    }

    pub fn aoi_row(&self, m: usize) -> &[u32] {
        &self.aoi[m]
    }

    /// Total age over sources, slot by slot.
    pub fn total_age(&self) -> Vec<u64> {
        let mut total = vec![0u64; self.horizon()];
        for row in &self.aoi {
            for (acc, &a) in total.iter_mut().zip(row) {
                *acc += u64::from(a);
            }
        }
        total
    }
}

/// Per-slot cumulative regret of one coupled (candidate, oracle) pair.
pub fn cumulative_regret(candidate: &RunTrace, oracle: &RunTrace) -> Result<Vec<i64>, MetricsError> {
    if candidate.sources() != oracle.sources() || candidate.horizon() != oracle.horizon() {
        return Err(MetricsError::LengthMismatch(format!(
            "candidate {}x{}, oracle {}x{}",
            candidate.sources(),
            candidate.horizon(),
            oracle.sources(),
            oracle.horizon()
        )));
    }
    let cand = candidate.total_age();
    let orc = oracle.total_age();
    let mut running = 0i64;
    Ok(cand
        .iter()
        .zip(&orc)
        .map(|(&c, &o)| {
            running += c as i64 - o as i64;
            running
        })
        .collect())
}

/// Mean and standard error of per-iteration cumulative regret.
///
/// Sums are kept as integers, so merging partial accumulators in any order
/// gives bit-identical curves.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegretAccumulator {
    iterations: u64,
    sum: Vec<i64>,
    sum_sq: Vec<i128>,
}

impl RegretAccumulator {
    pub fn new(horizon: usize) -> Self {
        Self {
            iterations: 0,
            sum: vec![0; horizon],
            sum_sq: vec![0; horizon],
        }
    }

    pub fn push(&mut self, cumulative: &[i64]) -> Result<(), MetricsError> {
        if cumulative.len() != self.sum.len() {
            return Err(MetricsError::LengthMismatch(format!(
                "regret series of length {}, expected {}",
                cumulative.len(),
                self.sum.len()
            )));
        }
        self.iterations += 1;
        for ((s, q), &r) in self.sum.iter_mut().zip(&mut self.sum_sq).zip(cumulative) {
            *s += r;
            *q += i128::from(r) * i128::from(r);
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &RegretAccumulator) -> Result<(), MetricsError> {
        if self.sum.len() != other.sum.len() {
            return Err(MetricsError::LengthMismatch("accumulator horizons differ".into()));
        }
        self.iterations += other.iterations;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(&other.sum_sq) {
            *a += b;
        }
        Ok(())
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn curve(&self) -> RegretCurve {
        let n = self.iterations;
        let mut mean = Vec::with_capacity(self.sum.len() + 1);
        let mut stderr = Vec::with_capacity(self.sum.len() + 1);
        mean.push(0.0);
        stderr.push(0.0);
        for (&s, &q) in self.sum.iter().zip(&self.sum_sq) {
            let (m, se) = mean_stderr(n, s as f64, q as f64);
            mean.push(m);
            stderr.push(se);
        }
        RegretCurve { mean, stderr }
    }
}

/// Sample mean and standard error from a count, sum and sum of squares.
pub fn mean_stderr(n: u64, sum: f64, sum_sq: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - sum * sum / nf) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// `mean[t]` and `stderr[t]` for `t = 0..=T`; `mean[0] = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurve {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl RegretCurve {
    pub fn horizon(&self) -> usize {
        self.mean.len() - 1
    }

    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("curve holds t = 0")
    }

    pub fn final_stderr(&self) -> f64 {
        *self.stderr.last().expect("curve holds t = 0")
    }
}

/// Mean regret curve over iteration-paired candidate and oracle traces.
pub fn regret(candidates: &[RunTrace], oracles: &[RunTrace]) -> Result<RegretCurve, MetricsError> {
    if candidates.len() != oracles.len() {
        return Err(MetricsError::LengthMismatch(format!(
            "{} candidate traces, {} oracle traces",
            candidates.len(),
            oracles.len()
        )));
    }
    let first = candidates.first().ok_or(MetricsError::NoTraces)?;
    let mut acc = RegretAccumulator::new(first.horizon());
    for (c, o) in candidates.iter().zip(oracles) {
        acc.push(&cumulative_regret(c, o)?)?;
    }
    Ok(acc.curve())
}

/// Mean pull counts `M x N` over traces.
pub fn pull_table(traces: &[RunTrace]) -> Result<Vec<Vec<f64>>, MetricsError> {
    let first = traces.first().ok_or(MetricsError::NoTraces)?;
    let mut table = PullAccumulator::new(first.sources(), first.pulls[0].len());
    for trace in traces {
        table.push(trace)?;
    }
    Ok(table.mean())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PullAccumulator {
    iterations: u64,
    sums: Vec<Vec<u64>>,
}

impl PullAccumulator {
    pub fn new(sources: usize, channels: usize) -> Self {
        Self {
            iterations: 0,
            sums: vec![vec![0; channels]; sources],
        }
    }

    pub fn push(&mut self, trace: &RunTrace) -> Result<(), MetricsError> {
        if trace.pulls.len() != self.sums.len()
            || trace.pulls.iter().any(|r| r.len() != self.sums[0].len())
        {
            return Err(MetricsError::LengthMismatch("pull table shape".into()));
        }
        self.iterations += 1;
        for (row, t) in self.sums.iter_mut().zip(&trace.pulls) {
            for (a, b) in row.iter_mut().zip(t) {
                *a += b;
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &PullAccumulator) {
        self.iterations += other.iterations;
        for (row, o) in self.sums.iter_mut().zip(&other.sums) {
            for (a, b) in row.iter_mut().zip(o) {
                *a += b;
            }
        }
    }

    pub fn mean(&self) -> Vec<Vec<f64>> {
        let n = self.iterations.max(1) as f64;
        self.sums
            .iter()
            .map(|row| row.iter().map(|&s| s as f64 / n).collect())
            .collect()
    }
}

/// Integer moments of a per-iteration count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CountAccumulator {
    pub iterations: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl CountAccumulator {
    pub fn push(&mut self, value: u64) {
        self.iterations += 1;
        self.sum += value;
        self.sum_sq += u128::from(value) * u128::from(value);
    }

    pub fn merge(&mut self, other: &CountAccumulator) {
        self.iterations += other.iterations;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }

    pub fn mean_stderr(&self) -> (f64, f64) {
        mean_stderr(self.iterations, self.sum as f64, self.sum_sq as f64)
    }
}

/// Terms of the analytical DLF regret bound at horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `-1 / ln GM(1 - mu_1, ..., 1 - mu_M)`.
    pub c_prime: f64,
    /// `c_prime / M`.
    pub c: f64,
    /// Bound on the expected number of slots a source plays a channel other
    /// than its oracle channel.
    pub n1_bound: f64,
    /// Bound on the expected number of slots another source takes a source's
    /// oracle channel.
    pub n2_bound: f64,
    pub total_bound: f64,
}

/// `M^2/mu_min + (M^2 c ln T / mu_min) [1 + (N-1)(8 ln T / D^2 + 1 + 2 pi^2 / 3)]`.
pub fn theorem5_bound(instance: &ProblemInstance, horizon: usize) -> Result<BoundTerms, MetricsError> {
    let m = instance.sources();
    let n = instance.channels();
    if m < 2 {
        return Err(MetricsError::SingleSource);
    }
    if horizon <= n {
        return Err(MetricsError::HorizonTooShort {
            horizon,
            channels: n,
        });
    }
    let delta = instance.delta();
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(MetricsError::DegenerateGap);
    }
    let mean_log_fail = instance
        .best_set()
        .iter()
        .map(|&mu| (1.0 - mu).ln())
        .sum::<f64>()
        / m as f64;
    let c_prime = -1.0 / mean_log_fail;
    let c = c_prime / m as f64;
    let log_t = (horizon as f64).ln();
    let per_arm = 8.0 * log_t / (delta * delta) + 1.0 + 2.0 * PI * PI / 3.0;
    let n1_bound = (n - 1) as f64 * per_arm;
    let n2_bound = (m - 1) as f64 * per_arm;
    let m2 = (m * m) as f64;
    let mu_min = instance.mu_min();
    let total_bound = m2 / mu_min + m2 * c * log_t / mu_min * (1.0 + n1_bound);
    Ok(BoundTerms {
        c_prime,
        c,
        n1_bound,
        n2_bound,
        total_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_summed_regret() {
        let cand = RunTrace::from_ages(PolicyKind::DLF, vec![vec![2, 1]]);
        let orc = RunTrace::from_ages(PolicyKind::OracleRR, vec![vec![1, 1]]);
        let curve = regret(&[cand], &[orc]).unwrap();
        assert_eq!(curve.mean, vec![0.0, 1.0, 1.0]);
        assert_eq!(curve.stderr, vec![0.0; 3]);
    }

    #[test]
    fn self_regret_is_zero() {
        let t = RunTrace::from_ages(PolicyKind::OracleRR, vec![vec![1, 2, 3], vec![2, 1, 1]]);
        let curve = regret(&[t.clone(), t.clone()], &[t.clone(), t]).unwrap();
        assert!(curve.mean.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mismatched_traces() {
        let a = RunTrace::from_ages(PolicyKind::DLF, vec![vec![1, 2]]);
        let b = RunTrace::from_ages(PolicyKind::OracleRR, vec![vec![1]]);
        assert!(matches!(regret(std::slice::from_ref(&a), &[b]), Err(MetricsError::LengthMismatch(_))));
        assert!(matches!(regret(&[a], &[]), Err(MetricsError::LengthMismatch(_))));
        assert_eq!(regret(&[], &[]), Err(MetricsError::NoTraces));
    }

    #[test]
    fn stderr_from_iterations() {
        let mut acc = RegretAccumulator::new(1);
        acc.push(&[1]).unwrap();
        acc.push(&[3]).unwrap();
        let c = acc.curve();
        assert_eq!(c.mean[1], 2.0);
        // sample sd = sqrt(2), stderr = 1
        assert!((c.stderr[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn merge_matches_sequential() {
        let series = [vec![1, 4, 2], vec![0, -3, 7], vec![5, 5, 5]];
        let mut all = RegretAccumulator::new(3);
        series.iter().for_each(|s| all.push(s).unwrap());
        let mut left = RegretAccumulator::new(3);
        let mut right = RegretAccumulator::new(3);
        left.push(&series[2]).unwrap();
        right.push(&series[0]).unwrap();
        right.push(&series[1]).unwrap();
        left.merge(&right).unwrap();
        assert_eq!(left, all);
    }

    #[test]
    fn default_instance_bound() {
        let inst = ProblemInstance::new(2, 4, &[0.8, 0.75, 0.7, 0.65]).unwrap();
        let b = theorem5_bound(&inst, 20_000).unwrap();
        // independent evaluation: GM(0.2, 0.25) = sqrt(0.05)
        let c_prime = -1.0 / 0.05f64.sqrt().ln();
        assert!((b.c_prime - c_prime).abs() < 1e-12);
        assert!((b.c - 0.3338).abs() < 1e-4);
        let log_t = 20_000f64.ln();
        let inner = 1.0 + 3.0 * (8.0 * log_t / 0.0025 + 1.0 + 2.0 * PI * PI / 3.0);
        let total = 4.0 / 0.65 + 4.0 * (c_prime / 2.0) * log_t / 0.65 * inner;
        assert!((b.total_bound - total).abs() / total < 1e-9);
        assert!((b.total_bound - 1.93e6).abs() < 0.01e6, "{}", b.total_bound);
    }

    #[test]
    fn bound_grows_with_horizon_and_channels() {
        let small = ProblemInstance::new(2, 4, &[0.8, 0.75, 0.7, 0.65]).unwrap();
        let large = ProblemInstance::new(2, 5, &[0.8, 0.75, 0.7, 0.65, 0.6]).unwrap();
        let mut last = 0.0;
        for t in [10, 100, 1000, 20_000, 1_000_000] {
            let b = theorem5_bound(&small, t).unwrap().total_bound;
            assert!(b > last);
            last = b;
            // more channels: more terms and a smaller mu_min
            assert!(theorem5_bound(&large, t).unwrap().total_bound > b);
        }
    }

    #[test]
    fn bound_rejects_degenerate_inputs() {
        let single = ProblemInstance::new(1, 2, &[0.8, 0.7]).unwrap();
        assert_eq!(theorem5_bound(&single, 100), Err(MetricsError::SingleSource));
        let inst = ProblemInstance::new(2, 4, &[0.8, 0.75, 0.7, 0.65]).unwrap();
        assert!(matches!(theorem5_bound(&inst, 4), Err(MetricsError::HorizonTooShort { .. })));
    }

    #[test]
    fn pull_table_means() {
        let mut a = RunTrace::from_ages(PolicyKind::OracleRR, vec![vec![1], vec![1]]);
        a.pulls = vec![vec![2, 0], vec![0, 2]];
        let mut b = a.clone();
        b.pulls = vec![vec![1, 1], vec![1, 1]];
        assert_eq!(pull_table(&[a, b]).unwrap(), vec![vec![1.5, 0.5], vec![0.5, 1.5]]);
    }
}
