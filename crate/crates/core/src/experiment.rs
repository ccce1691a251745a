//! Monte-Carlo experiments: configuration, parallel execution, CSV output.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{equidistant_mu, InstanceError, PolicyKind, ProblemInstance};
use crate::metrics::{cumulative_regret, CountAccumulator, MetricsError, PullAccumulator, RegretAccumulator, RegretCurve};
use crate::policies::HybridMn;
use crate::sim::{run_policy, RunSeeds, SimError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("i/o error at {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl From<InstanceError> for ExperimentError {
    fn from(e: InstanceError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// An instance given either by its probabilities or by an equidistant
/// generator `mu[n] = mu1 - n * delta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Explicit(ExplicitInstance),
    Generator(GeneratedInstance),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitInstance {
    #[serde(rename = "M")]
    pub sources: usize,
    #[serde(rename = "N")]
    pub channels: usize,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratedInstance {
    #[serde(rename = "M")]
    pub sources: usize,
    #[serde(rename = "N")]
    pub channels: usize,
    pub mu1: f64,
    pub delta: f64,
}

impl InstanceSpec {
    pub fn explicit(sources: usize, channels: usize, mu: &[f64]) -> Self {
        InstanceSpec::Explicit(ExplicitInstance {
            sources,
            channels,
            mu: mu.to_vec(),
        })
    }

    pub fn generator(sources: usize, channels: usize, mu1: f64, delta: f64) -> Self {
        InstanceSpec::Generator(GeneratedInstance {
            sources,
            channels,
            mu1,
            delta,
        })
    }

    pub fn build(&self) -> Result<ProblemInstance, InstanceError> {
        match self {
            InstanceSpec::Explicit(e) => ProblemInstance::new(e.sources, e.channels, &e.mu),
            InstanceSpec::Generator(g) => ProblemInstance::equidistant(g.sources, g.channels, g.mu1, g.delta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub iterations: u64,
    pub policies: Vec<PolicyKind>,
    pub master_seed: u64,
    #[serde(default)]
    pub hybrid_mn_interpretation: HybridMn,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<ProblemInstance, ExperimentError> {
        if self.iterations == 0 {
            return Err(ExperimentError::Config("iterations must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(ExperimentError::Config("T must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(ExperimentError::Config("policies must be non-empty".into()));
        }
        Ok(self.instance.build()?)
    }
}

/// Aggregates of one policy over all iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    /// `mean[t]` for `t = 0..=T`.
    pub regret: RegretCurve,
    /// `pulls[m][n]`, averaged over iterations.
    pub pulls: Vec<Vec<f64>>,
    pub collisions: (f64, f64),
    /// Per source: mean slots spent sharing a channel.
    pub collided_slots: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub instance: ProblemInstance,
    pub horizon: usize,
    pub iterations: u64,
    pub policies: Vec<PolicySummary>,
}

impl ExperimentResult {
    pub fn policy(&self, kind: PolicyKind) -> Option<&PolicySummary> {
        self.policies.iter().find(|p| p.policy == kind)
    }
}

#[derive(Clone)]
struct PolicyAccumulator {
    regret: RegretAccumulator,
    pulls: PullAccumulator,
    collisions: CountAccumulator,
    collided: Vec<CountAccumulator>,
}

impl PolicyAccumulator {
    fn new(sources: usize, channels: usize, horizon: usize) -> Self {
        Self {
            regret: RegretAccumulator::new(horizon),
            pulls: PullAccumulator::new(sources, channels),
            collisions: CountAccumulator::default(),
            collided: vec![CountAccumulator::default(); sources],
        }
    }

    fn merge(&mut self, other: &Self) -> Result<(), MetricsError> {
        self.regret.merge(&other.regret)?;
        self.pulls.merge(&other.pulls);
        self.collisions.merge(&other.collisions);
        for (a, b) in self.collided.iter_mut().zip(&other.collided) {
            a.merge(b);
        }
        Ok(())
    }
}

fn run_iteration(
    cfg: &ExperimentConfig,
    instance: &ProblemInstance,
    iteration: u64,
    acc: &mut [PolicyAccumulator],
) -> Result<(), ExperimentError> {
    let seeds = RunSeeds::new(cfg.master_seed, iteration);
    let tape = seeds.tape(instance, cfg.horizon);
    let hybrid = cfg.hybrid_mn_interpretation;
    let oracle = run_policy(instance, &tape, PolicyKind::OracleRR, hybrid, seeds)?;
    for (kind, a) in cfg.policies.iter().zip(acc.iter_mut()) {
        let trace = if *kind == PolicyKind::OracleRR {
            oracle.clone()
        } else {
            run_policy(instance, &tape, *kind, hybrid, seeds)?
        };
        a.regret.push(&cumulative_regret(&trace, &oracle)?)?;
        a.pulls.push(&trace)?;
        a.collisions.push(trace.collisions);
        for (c, &n) in a.collided.iter_mut().zip(&trace.collided_slots) {
            c.push(n);
        }
    }
    Ok(())
}

/// Runs every configured policy on `iterations` coupled tapes.
///
/// Iterations run in parallel; all sums are integers, so the result does not
/// depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult, ExperimentError> {
    let instance = cfg.validate()?;
    let (m, n, t) = (instance.sources(), instance.channels(), cfg.horizon);
    let fresh = || vec![PolicyAccumulator::new(m, n, t); cfg.policies.len()];
    let merged = (0..cfg.iterations)
        .into_par_iter()
        .try_fold(fresh, |mut acc, it| {
            run_iteration(cfg, &instance, it, &mut acc)?;
            Ok::<_, ExperimentError>(acc)
        })
        .try_reduce(fresh, |mut a, b| {
            for (x, y) in a.iter_mut().zip(&b) {
                x.merge(y)?;
            }
            Ok(a)
        })?;
    let policies = cfg
        .policies
        .iter()
        .zip(merged)
        .map(|(&policy, a)| PolicySummary {
            policy,
            regret: a.regret.curve(),
            pulls: a.pulls.mean(),
            collisions: a.collisions.mean_stderr(),
            collided_slots: a.collided.iter().map(|c| c.mean_stderr().0).collect(),
        })
        .collect();
    Ok(ExperimentResult {
        instance,
        horizon: t,
        iterations: cfg.iterations,
        policies,
    })
}

fn csv_string<F>(header: &[&str], fill: F) -> String
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    fill(&mut w).expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}

pub const REGRET_CURVE_HEADER: [&str; 4] = ["t", "policy", "mean_regret", "stderr"];
pub const PULLS_HEADER: [&str; 4] = ["policy", "source", "channel", "mean_pulls"];
pub const COLLISIONS_HEADER: [&str; 3] = ["policy", "mean_collisions", "stderr"];
pub const SUMMARY_HEADER: [&str; 8] = [
    "policy",
    "source",
    "final_regret",
    "regret_stderr",
    "mean_collisions",
    "collisions_stderr",
    "mean_collided_slots",
    "mean_pulls",
];
pub const SWEEP_HEADER: [&str; 6] = ["axis", "value", "policy", "final_regret", "stderr", "final_regret_per_M"];

impl ExperimentResult {
    /// Sources and channels are 1-based in every file.
    pub fn regret_curve_csv(&self) -> String {
        csv_string(&REGRET_CURVE_HEADER, |w| {
            for p in &self.policies {
                for (t, (m, se)) in p.regret.mean.iter().zip(&p.regret.stderr).enumerate() {
                    w.write_record([t.to_string(), p.policy.to_string(), m.to_string(), se.to_string()])?;
                }
            }
            Ok(())
        })
    }

    pub fn pulls_csv(&self) -> String {
        csv_string(&PULLS_HEADER, |w| {
            for p in &self.policies {
                for (m, row) in p.pulls.iter().enumerate() {
                    for (n, v) in row.iter().enumerate() {
                        w.write_record([p.policy.to_string(), (m + 1).to_string(), (n + 1).to_string(), v.to_string()])?;
                    }
                }
            }
            Ok(())
        })
    }

    pub fn collisions_csv(&self) -> String {
        csv_string(&COLLISIONS_HEADER, |w| {
            for p in &self.policies {
                w.write_record([p.policy.to_string(), p.collisions.0.to_string(), p.collisions.1.to_string()])?;
            }
            Ok(())
        })
    }

    /// One row per (policy, source); `mean_pulls` lists the source's mean
    /// pulls per channel separated by `;`.
    pub fn summary_csv(&self) -> String {
        csv_string(&SUMMARY_HEADER, |w| {
            for p in &self.policies {
                for (m, row) in p.pulls.iter().enumerate() {
                    let pulls = row.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
                    w.write_record([
                        p.policy.to_string(),
                        (m + 1).to_string(),
                        p.regret.final_mean().to_string(),
                        p.regret.final_stderr().to_string(),
                        p.collisions.0.to_string(),
                        p.collisions.1.to_string(),
                        p.collided_slots[m].to_string(),
                        pulls,
                    ])?;
                }
            }
            Ok(())
        })
    }

    /// Writes regret_curve.csv, pulls.csv, collisions.csv and summary.csv.
    pub fn write_csvs(&self, dir: &Path) -> Result<(), ExperimentError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for (name, body) in [
            ("regret_curve.csv", self.regret_curve_csv()),
            ("pulls.csv", self.pulls_csv()),
            ("collisions.csv", self.collisions_csv()),
            ("summary.csv", self.summary_csv()),
        ] {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(&path))?;
        }
        Ok(())
    }

    /// Fixed-width mean pull table, one block per policy.
    pub fn pull_table_text(&self) -> String {
        let mut out = String::new();
        for p in &self.policies {
            out.push_str(&format!("{} (mean collisions {:.1})\n", p.policy, p.collisions.0));
            out.push_str("  source");
            for n in 0..self.instance.channels() {
                out.push_str(&format!("{:>10}", format!("n={}", n + 1)));
            }
            out.push('\n');
            for (m, row) in p.pulls.iter().enumerate() {
                out.push_str(&format!("  m={:<5}", m + 1));
                for v in row {
                    out.push_str(&format!("{v:>10.0}"));
                }
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    N,
    M,
    #[serde(rename = "delta")]
    Delta,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::N => "N",
            SweepAxis::M => "M",
            SweepAxis::Delta => "delta",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" | "n" => Ok(SweepAxis::N),
            "M" | "m" => Ok(SweepAxis::M),
            "delta" | "Delta" | "DELTA" => Ok(SweepAxis::Delta),
            other => Err(ExperimentError::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

/// The configuration for one point of a sweep.
///
/// - `N`: the channel count changes; the generator keeps `mu1` and `delta`.
/// - `M`: the source count changes; the probabilities are kept.
/// - `delta`: the generator gap changes.
pub fn sweep_point(template: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig, ExperimentError> {
    let as_count = || -> Result<usize, ExperimentError> {
        if value >= 1.0 && value.fract() == 0.0 {
            Ok(value as usize)
        } else {
            Err(ExperimentError::Config(format!("{axis} must be a positive integer, got {value}")))
        }
    };
    let mut cfg = template.clone();
    cfg.instance = match (&template.instance, axis) {
        (InstanceSpec::Generator(g), SweepAxis::N) => InstanceSpec::generator(g.sources, as_count()?, g.mu1, g.delta),
        (InstanceSpec::Generator(g), SweepAxis::M) => InstanceSpec::generator(as_count()?, g.channels, g.mu1, g.delta),
        (InstanceSpec::Generator(g), SweepAxis::Delta) => InstanceSpec::generator(g.sources, g.channels, g.mu1, value),
        (InstanceSpec::Explicit(e), SweepAxis::M) => InstanceSpec::explicit(as_count()?, e.channels, &e.mu),
        (InstanceSpec::Explicit(_), _) => {
            return Err(ExperimentError::Config(format!(
                "a {axis} sweep needs a generator instance (mu1, delta)"
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub policy: PolicyKind,
    pub final_regret: f64,
    pub stderr: f64,
    pub final_regret_per_m: f64,
}

pub fn sweep_rows(axis: SweepAxis, value: f64, result: &ExperimentResult) -> Vec<SweepRow> {
    let m = result.instance.sources() as f64;
    result
        .policies
        .iter()
        .map(|p| SweepRow {
            axis,
            value,
            policy: p.policy,
            final_regret: p.regret.final_mean(),
            stderr: p.regret.final_stderr(),
            final_regret_per_m: p.regret.final_mean() / m,
        })
        .collect()
}

/// Runs the template at each axis value.
pub fn sweep(template: &ExperimentConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<SweepRow>, ExperimentError> {
    let mut rows = Vec::new();
    for &v in values {
        let cfg = sweep_point(template, axis, v)?;
        rows.extend(sweep_rows(axis, v, &run_experiment(&cfg)?));
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    csv_string(&SWEEP_HEADER, |w| {
        for r in rows {
            w.write_record([
                r.axis.to_string(),
                r.value.to_string(),
                r.policy.to_string(),
                r.final_regret.to_string(),
                r.stderr.to_string(),
                r.final_regret_per_m.to_string(),
            ])?;
        }
        Ok(())
    })
}

pub fn write_sweep_csv(rows: &[SweepRow], dir: &Path) -> Result<PathBuf, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join("sweep.csv");
    fs::write(&path, sweep_csv(rows)).map_err(io_err(&path))?;
    Ok(path)
}

/// Probabilities of the M-sweep instance: `N` channels from `mu1` down in
/// steps of `delta`.
pub fn fixed_mu(channels: usize, mu1: f64, delta: f64) -> Vec<f64> {
    equidistant_mu(channels, mu1, delta)
}
