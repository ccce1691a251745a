//! Exact checks of the oracle results at desk scale.
//!
//! Expected ages use the tail-sum identity
//! `E[a(t)] = sum_{tau >= 0} P(a(t) > tau)`, where `a(t) > tau` means the
//! `tau` slots before `t` all failed.

use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::env::oracle_schedule;
use crate::instance::ProblemInstance;
use crate::metrics::theorem5_bound;
use crate::rng::{derive_stream, RngStreamSpec, StreamRole};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("{sources} sources give {count} candidate schedules, above the cap of {cap}")]
    TooLarge { sources: usize, count: u128, cap: u128 },
    #[error("schedule is empty")]
    EmptySchedule,
}

/// `slots[m][s]`: channel of source `m` in slot `s + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScheduleMatrix {
    slots: Vec<Vec<usize>>,
    periodic: bool,
}

impl ScheduleMatrix {
    /// A schedule that repeats with period `H` (its length) into the infinite
    /// past and future.
    pub fn periodic(slots: Vec<Vec<usize>>) -> Result<Self, VerifyError> {
        Self::build(slots, true)
    }

    /// A schedule that starts at slot 1 with every age equal to 1.
    pub fn finite(slots: Vec<Vec<usize>>) -> Result<Self, VerifyError> {
        Self::build(slots, false)
    }

    fn build(slots: Vec<Vec<usize>>, periodic: bool) -> Result<Self, VerifyError> {
        let h = slots.first().map_or(0, Vec::len);
        if h == 0 || slots.iter().any(|r| r.len() != h) {
            return Err(VerifyError::EmptySchedule);
        }
        Ok(Self { slots, periodic })
    }

    /// The round-robin oracle over one period.
    pub fn round_robin(sources: usize) -> Self {
        let slots = (0..sources)
            .map(|m| (1..=sources).map(|t| oracle_schedule(sources, m, t)).collect())
            .collect();
        Self {
            slots,
            periodic: true,
        }
    }

    pub fn sources(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.slots[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.slots
    }

    /// Channel of source `m` in slot `t`; `None` before slot 1 of a finite
    /// schedule.
    pub fn channel(&self, m: usize, t: i64) -> Option<usize> {
        let h = self.len() as i64;
        if self.periodic {
            Some(self.slots[m][(t - 1).rem_euclid(h) as usize])
        } else if t >= 1 && t <= h {
            Some(self.slots[m][(t - 1) as usize])
        } else {
            None
        }
    }

    pub fn is_collision_free(&self) -> bool {
        (0..self.len()).all(|s| {
            let mut col: Vec<usize> = self.slots.iter().map(|r| r[s]).collect();
            col.sort_unstable();
            col.windows(2).all(|w| w[0] != w[1])
        })
    }

    /// Sorted (descending) per-channel counts of source `m` over the `len`
    /// slots starting at period phase `start`.
    pub fn window_counts(&self, m: usize, start: usize, len: usize, channels: usize) -> Vec<usize> {
        let h = self.len();
        let mut counts = vec![0usize; channels];
        for i in 0..len {
            counts[self.slots[m][(start + i) % h]] += 1;
        }
        counts.sort_unstable_by(|a, b| b.cmp(a));
        counts
    }

    /// Every cyclic window of every length up to one period has the same
    /// sorted usage counts for all sources.
    pub fn is_symmetric(&self, channels: usize) -> bool {
        let h = self.len();
        (0..h).all(|start| {
            (1..=h).all(|len| {
                let first = self.window_counts(0, start, len, channels);
                (1..self.sources()).all(|m| self.window_counts(m, start, len, channels) == first)
            })
        })
    }

    /// Lexicographically smallest cyclic shift in time.
    pub fn canonical(&self) -> ScheduleMatrix {
        let h = self.len();
        let shift = |k: usize| -> Vec<Vec<usize>> {
            self.slots
                .iter()
                .map(|r| (0..h).map(|s| r[(s + k) % h]).collect())
                .collect()
        };
        let columns = |rows: &Vec<Vec<usize>>| -> Vec<usize> {
            (0..h).flat_map(|s| rows.iter().map(move |r| r[s])).collect()
        };
        let best = (0..h)
            .map(shift)
            .min_by(|a, b| columns(a).cmp(&columns(b)))
            .expect("non-empty schedule");
        ScheduleMatrix {
            slots: best,
            periodic: self.periodic,
        }
    }
}

/// Expected age of source `m` in slot `t`, truncated once the running
/// survival product drops below `tol`. The truncation error is below
/// `tol / mu_min`.
pub fn expected_aoi_schedule(mu: &[f64], sched: &ScheduleMatrix, m: usize, t: i64, tol: f64) -> f64 {
    let mut total = 1.0;
    let mut survive = 1.0;
    let mut i = 1;
    while let Some(channel) = sched.channel(m, t - i) {
        survive *= 1.0 - mu[channel];
        total += survive;
        if survive < tol {
            break;
        }
        i += 1;
    }
    total
}

/// Period-averaged total expected age of a periodic schedule.
pub fn mean_total_aoi(mu: &[f64], sched: &ScheduleMatrix, tol: f64) -> f64 {
    let h = sched.len();
    let sum: f64 = (1..=h as i64)
        .map(|t| {
            (0..sched.sources())
                .map(|m| expected_aoi_schedule(mu, sched, m, t, tol))
                .sum::<f64>()
        })
        .sum();
    sum / h as f64
}

/// Expected total age under uniform i.i.d. scheduling on the best-`M` set:
/// each source sees `mean(mu_1..mu_M)`, so the total is `M / mean`.
pub fn iid_total_aoi(best: &[f64]) -> f64 {
    let m = best.len() as f64;
    let mean = best.iter().sum::<f64>() / m;
    m / mean
}

/// `x` majorizes `y`: equal totals and every prefix sum of the descending
/// sort of `x` is at least that of `y`.
pub fn majorizes(x: &[usize], y: &[usize]) -> bool {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_unstable_by(|a, b| b.cmp(a));
    ys.sort_unstable_by(|a, b| b.cmp(a));
    let len = xs.len().max(ys.len());
    xs.resize(len, 0);
    ys.resize(len, 0);
    let (mut px, mut py) = (0, 0);
    for (a, b) in xs.iter().zip(&ys) {
        px += a;
        py += b;
        if px < py {
            return false;
        }
    }
    px == py
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleValue {
    pub schedule: ScheduleMatrix,
    pub mean_total_aoi: f64,
    pub is_round_robin: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEnumeration {
    pub sources: usize,
    pub schedules: Vec<ScheduleValue>,
    /// Index into `schedules` of the smallest value.
    pub minimizer: usize,
    pub round_robin_value: f64,
}

impl SymmetricEnumeration {
    pub fn min_value(&self) -> f64 {
        self.schedules[self.minimizer].mean_total_aoi
    }

    /// The round-robin value is within `tol` of the minimum.
    pub fn round_robin_is_minimal(&self, tol: f64) -> bool {
        self.round_robin_value <= self.min_value() + tol
    }
}

/// Default cap on the raw number of period-`M` schedules enumerated.
pub const ENUMERATION_CAP: u128 = 1_000_000;

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out.sort();
    out
}

/// All collision-free, symmetric, period-`M` schedules on the best-`M`
/// channels, one per cyclic time shift, with their period-averaged expected
/// total age.
pub fn enumerate_symmetric_policies(
    instance: &ProblemInstance,
    tol: f64,
    cap: u128,
) -> Result<SymmetricEnumeration, VerifyError> {
    enumerate_symmetric_mu(instance.best_set(), tol, cap)
}

/// As [`enumerate_symmetric_policies`], on raw best-set probabilities.
pub fn enumerate_symmetric_mu(
    best: &[f64],
    tol: f64,
    cap: u128,
) -> Result<SymmetricEnumeration, VerifyError> {
    let m = best.len();
    let perms = permutations(m);
    let count = (perms.len() as u128).checked_pow(m as u32).unwrap_or(u128::MAX);
    if count > cap {
        return Err(VerifyError::TooLarge {
            sources: m,
            count,
            cap,
        });
    }
    let rr = ScheduleMatrix::round_robin(m);
    let rr_canonical = rr.canonical();
    let rr_value = mean_total_aoi(best, &rr, tol);

    let mut schedules = Vec::new();
    let mut digits = vec![0usize; m];
    loop {
        let slots: Vec<Vec<usize>> = (0..m)
            .map(|src| digits.iter().map(|&p| perms[p][src]).collect())
            .collect();
        let sched = ScheduleMatrix {
            slots,
            periodic: true,
        };
        if sched.canonical() == sched && sched.is_symmetric(m) {
            let value = mean_total_aoi(best, &sched, tol);
            let is_round_robin = sched == rr_canonical;
            schedules.push(ScheduleValue {
                schedule: sched,
                mean_total_aoi: value,
                is_round_robin,
            });
        }
        // odometer over permutation indices
        let mut i = 0;
        while i < m {
            digits[i] += 1;
            if digits[i] < perms.len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == m {
            break;
        }
    }
    let minimizer = (0..schedules.len())
        .min_by(|&a, &b| {
            schedules[a]
                .mean_total_aoi
                .total_cmp(&schedules[b].mean_total_aoi)
                .then(schedules[b].is_round_robin.cmp(&schedules[a].is_round_robin))
        })
        .expect("round robin is always enumerated");
    Ok(SymmetricEnumeration {
        sources: m,
        schedules,
        minimizer,
        round_robin_value: rr_value,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrIidComparison {
    pub round_robin: f64,
    pub iid: f64,
}

impl RrIidComparison {
    pub fn round_robin_not_worse(&self, tol: f64) -> bool {
        self.round_robin <= self.iid + tol
    }
}

pub fn compare_rr_iid(instance: &ProblemInstance, tol: f64) -> RrIidComparison {
    compare_rr_iid_mu(instance.best_set(), tol)
}

/// Round-robin versus uniform i.i.d. on raw best-set probabilities, which may
/// contain ties.
pub fn compare_rr_iid_mu(best: &[f64], tol: f64) -> RrIidComparison {
    let rr = ScheduleMatrix::round_robin(best.len());
    RrIidComparison {
        round_robin: mean_total_aoi(best, &rr, tol),
        iid: iid_total_aoi(best),
    }
}

/// `f(lambda) = sum_m 1 / sum_j lambda[m][j] mu_j`.
pub fn iid_objective(lambda: &[Vec<f64>], mu: &[f64]) -> f64 {
    lambda
        .iter()
        .map(|row| 1.0 / row.iter().zip(mu).map(|(l, m)| l * m).sum::<f64>())
        .sum()
}

/// Random doubly stochastic `M x M` matrix by alternating row and column
/// normalization of a positive random matrix. Returns the matrix and its
/// largest marginal error.
pub fn random_doubly_stochastic<R: Rng + ?Sized>(m: usize, rng: &mut R, tol: f64) -> (Vec<Vec<f64>>, f64) {
    // squaring spreads entries over three orders of magnitude, so samples
    // land near the vertices as well as the centre
    let mut a: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            (0..m)
                .map(|_| {
                    let u: f64 = rng.random_range(0.03..1.0);
                    u * u
                })
                .collect()
        })
        .collect();
    let mut err = f64::INFINITY;
    for _ in 0..100_000 {
        for row in a.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        for j in 0..m {
            let s: f64 = a.iter().map(|r| r[j]).sum();
            a.iter_mut().for_each(|r| r[j] /= s);
        }
        err = a
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        if err < tol {
            break;
        }
    }
    (a, err)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidOptimumCheck {
    pub samples: usize,
    /// `min over samples of f(lambda) - f(uniform)`.
    pub worst_violation: f64,
    pub uniform_value: f64,
    pub max_marginal_error: f64,
}

impl IidOptimumCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.worst_violation >= -tol
    }
}

/// Random search for a feasible i.i.d. weighting that beats uniform.
pub fn check_iid_optimum<R: Rng + ?Sized>(best: &[f64], samples: usize, rng: &mut R) -> IidOptimumCheck {
    let m = best.len();
    let uniform = vec![vec![1.0 / m as f64; m]; m];
    let uniform_value = iid_objective(&uniform, best);
    let mut worst = f64::INFINITY;
    let mut max_err = 0.0f64;
    for _ in 0..samples {
        let (lambda, err) = random_doubly_stochastic(m, rng, 1e-10);
        max_err = max_err.max(err);
        worst = worst.min(iid_objective(&lambda, best) - uniform_value);
    }
    IidOptimumCheck {
        samples,
        worst_violation: worst,
        uniform_value,
        max_marginal_error: max_err,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub instance: ProblemInstance,
    pub checks: Vec<CheckResult>,
    pub enumeration: Option<SymmetricEnumeration>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn render(&self) -> String {
        let mut out = format!("verification of {}\n", self.instance);
        for c in &self.checks {
            let tag = match c.status {
                CheckStatus::Pass => "PASS",
                CheckStatus::Fail => "FAIL",
                CheckStatus::Skipped => "SKIP",
            };
            let _ = writeln!(out, "[{tag}] {}: {}", c.name, c.detail);
        }
        out
    }

    /// `sources,schedule,mean_total_aoi,is_round_robin,is_minimizer`, one row
    /// per enumerated schedule. The schedule column lists each source's
    /// 1-based channels, sources separated by `|`.
    pub fn schedules_csv(&self) -> String {
        let mut out = String::from("sources,schedule,mean_total_aoi,is_round_robin,is_minimizer\n");
        if let Some(e) = &self.enumeration {
            for (i, s) in e.schedules.iter().enumerate() {
                let sched = s
                    .schedule
                    .rows()
                    .iter()
                    .map(|r| r.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join(" "))
                    .collect::<Vec<_>>()
                    .join("|");
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    e.sources,
                    sched,
                    s.mean_total_aoi,
                    s.is_round_robin,
                    i == e.minimizer
                );
            }
        }
        out
    }
}

/// Tolerance for exact evaluations.
pub const EXACT_TOL: f64 = 1e-9;
/// Survival-product cutoff for truncated tail sums.
pub const TAIL_TOL: f64 = 1e-15;

/// Runs every desk-scale check on `instance`.
pub fn run_verification(
    instance: &ProblemInstance,
    horizon: usize,
    samples: usize,
    seed: u64,
) -> VerificationReport {
    let mut checks = Vec::new();
    let enumeration = match enumerate_symmetric_policies(instance, TAIL_TOL, ENUMERATION_CAP) {
        Ok(e) => {
            let ok = e.round_robin_is_minimal(EXACT_TOL);
            checks.push(CheckResult {
                name: "round-robin minimal among symmetric M-periodic schedules",
                status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
                detail: format!(
                    "{} schedules, round-robin {:.12}, minimum {:.12}",
                    e.schedules.len(),
                    e.round_robin_value,
                    e.min_value()
                ),
            });
            Some(e)
        }
        Err(err) => {
            checks.push(CheckResult {
                name: "round-robin minimal among symmetric M-periodic schedules",
                status: CheckStatus::Skipped,
                detail: err.to_string(),
            });
            None
        }
    };

    let cmp = compare_rr_iid(instance, TAIL_TOL);
    let strict = instance.sources() > 1;
    let ok = if strict {
        cmp.round_robin < cmp.iid - EXACT_TOL
    } else {
        cmp.round_robin_not_worse(EXACT_TOL)
    };
    checks.push(CheckResult {
        name: "round-robin beats uniform i.i.d.",
        status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        detail: format!("round-robin {:.12}, i.i.d. {:.12}", cmp.round_robin, cmp.iid),
    });

    let mut rng = derive_stream(RngStreamSpec::new(seed, 0, StreamRole::PolicySampling));
    let iid = check_iid_optimum(instance.best_set(), samples, &mut rng);
    checks.push(CheckResult {
        name: "uniform weights optimal among i.i.d. policies",
        status: if iid.holds(EXACT_TOL) {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        },
        detail: format!(
            "{} samples, worst f(lambda) - f(uniform) = {:.3e}, marginal error <= {:.1e}",
            iid.samples, iid.worst_violation, iid.max_marginal_error
        ),
    });

    match theorem5_bound(instance, horizon) {
        Ok(b) => checks.push(CheckResult {
            name: "DLF regret bound",
            status: if b.total_bound.is_finite() && b.total_bound > 0.0 {
                CheckStatus::Pass
            } else {
                CheckStatus::Fail
            },
            detail: format!(
                "T = {horizon}: c' = {:.6}, c = {:.6}, N1 <= {:.1}, N2 <= {:.1}, bound = {:.6e}",
                b.c_prime, b.c, b.n1_bound, b.n2_bound, b.total_bound
            ),
        }),
        Err(e) => checks.push(CheckResult {
            name: "DLF regret bound",
            status: CheckStatus::Skipped,
            detail: e.to_string(),
        }),
    }

    VerificationReport {
        instance: instance.clone(),
        checks,
        enumeration,
    }
}
