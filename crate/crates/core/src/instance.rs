//! Problem instances `(M, N, mu)` and the policy catalogue.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("at least one source is required")]
    Empty,
    #[error("{channels} channels cannot serve {sources} sources")]
    TooFewChannels { sources: usize, channels: usize },
    #[error("expected {expected} success probabilities, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("success probability {value} at position {index} is outside (0, 1)")]
    OutOfRange { index: usize, value: f64 },
    #[error("success probabilities must be distinct, {value} appears more than once")]
    NonStrictOrder { value: f64 },
}

/// A validated problem instance.
///
/// Channels are indexed `0..N` in the sorted order, so channel `0` is the best
/// channel and `0..M` is the best-`M` set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    sources: usize,
    channels: usize,
    mu: Vec<f64>,
    delta: f64,
    mu_min: f64,
}

impl ProblemInstance {
    /// Validates `(M, N, mu)`. `mu` may be given in any order; it is sorted
    /// descending.
    pub fn new(sources: usize, channels: usize, mu: &[f64]) -> Result<Self, InstanceError> {
        if sources < 1 {
            return Err(InstanceError::Empty);
        }
        if channels < sources {
            return Err(InstanceError::TooFewChannels { sources, channels });
        }
        if mu.len() != channels {
            return Err(InstanceError::LengthMismatch {
                expected: channels,
                got: mu.len(),
            });
        }
        for (index, &value) in mu.iter().enumerate() {
            if !(value > 0.0 && value < 1.0) {
                return Err(InstanceError::OutOfRange { index, value });
            }
        }
        let mut sorted = mu.to_vec();
        sorted.sort_by(|a, b| b.total_cmp(a));
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(InstanceError::NonStrictOrder { value: w[0] });
        }
        let delta = min_gap(&sorted[..sources]);
        let mu_min = sorted[channels - 1];
        Ok(Self {
            sources,
            channels,
            mu: sorted,
            delta,
            mu_min,
        })
    }

    /// Equidistant instance `mu_n = mu1 - (n - 1) * delta`.
    pub fn equidistant(
        sources: usize,
        channels: usize,
        mu1: f64,
        delta: f64,
    ) -> Result<Self, InstanceError> {
        let mu = equidistant_mu(channels, mu1, delta);
        Self::new(sources, channels, &mu)
    }

    pub fn sources(&self) -> usize {
        self.sources
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Success probabilities, strictly descending.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// Smallest gap between adjacent success probabilities among the best `M`
    /// channels; `+inf` when `M = 1`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mu_min(&self) -> f64 {
        self.mu_min
    }

    /// Success probabilities of the best-`M` set.
    pub fn best_set(&self) -> &[f64] {
        &self.mu[..self.sources]
    }
}

impl fmt::Display for ProblemInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(M={}, N={}, mu=[", self.sources, self.channels)?;
        for (i, m) in self.mu.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{m}")?;
        }
        f.write_str("])")
    }
}

/// `mu1, mu1 - delta, ...`, rounded to 12 decimals so that generated grids
/// such as `0.9 - 0.1 * 6` come out as the intended decimal values.
pub fn equidistant_mu(channels: usize, mu1: f64, delta: f64) -> Vec<f64> {
    (0..channels)
        .map(|n| {
            let v = mu1 - n as f64 * delta;
            (v * 1e12).round() / 1e12
        })
        .collect()
}

fn min_gap(sorted_desc: &[f64]) -> f64 {
    sorted_desc
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(f64::INFINITY, f64::min)
}

/// The eight scheduling policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PolicyKind {
    /// Round-robin over the best-`M` channels (the oracle).
    OracleRR,
    /// Uniformly random permutation of the best-`M` channels every slot.
    IID,
    DLF,
    DLTS,
    DLH,
    #[serde(rename = "DLF_AA")]
    DlfAa,
    #[serde(rename = "DLTS_AA")]
    DltsAa,
    #[serde(rename = "DLH_AA")]
    DlhAa,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 8] = [
        PolicyKind::OracleRR,
        PolicyKind::IID,
        PolicyKind::DLF,
        PolicyKind::DLTS,
        PolicyKind::DLH,
        PolicyKind::DlfAa,
        PolicyKind::DltsAa,
        PolicyKind::DlhAa,
    ];

    /// The six learning policies compared in the experiments.
    pub const LEARNING: [PolicyKind; 6] = [
        PolicyKind::DLF,
        PolicyKind::DLTS,
        PolicyKind::DLH,
        PolicyKind::DlfAa,
        PolicyKind::DltsAa,
        PolicyKind::DlhAa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::OracleRR => "OracleRR",
            PolicyKind::IID => "IID",
            PolicyKind::DLF => "DLF",
            PolicyKind::DLTS => "DLTS",
            PolicyKind::DLH => "DLH",
            PolicyKind::DlfAa => "DLF_AA",
            PolicyKind::DltsAa => "DLTS_AA",
            PolicyKind::DlhAa => "DLH_AA",
        }
    }

    pub fn is_aoi_aware(self) -> bool {
        matches!(
            self,
            PolicyKind::DlfAa | PolicyKind::DltsAa | PolicyKind::DlhAa
        )
    }

    /// The AoI-agnostic policy an AoI-aware variant wraps.
    pub fn agnostic_base(self) -> PolicyKind {
        match self {
            PolicyKind::DlfAa => PolicyKind::DLF,
            PolicyKind::DltsAa => PolicyKind::DLTS,
            PolicyKind::DlhAa => PolicyKind::DLH,
            other => other,
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
#[error("unknown policy `{0}`")]
pub struct UnknownPolicy(pub String);

impl FromStr for PolicyKind {
    type Err = UnknownPolicy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownPolicy(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fig2a_instance() {
        let inst = ProblemInstance::new(2, 4, &[0.8, 0.75, 0.7, 0.65]).unwrap();
        assert!((inst.delta() - 0.05).abs() < 1e-12);
        assert_eq!(inst.mu_min(), 0.65);
    }

    #[test]
    fn single_source_has_infinite_gap() {
        let inst = ProblemInstance::new(1, 1, &[0.5]).unwrap();
        assert!(inst.delta().is_infinite());
        assert_eq!(inst.mu_min(), 0.5);
    }

    #[test]
    fn rejects_bad_instances() {
        assert_eq!(
            ProblemInstance::new(2, 2, &[0.5, 0.5]),
            Err(InstanceError::NonStrictOrder { value: 0.5 })
        );
        assert!(matches!(
            ProblemInstance::new(1, 2, &[1.0, 0.5]),
            Err(InstanceError::OutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            ProblemInstance::new(1, 1, &[0.0]),
            Err(InstanceError::OutOfRange { .. })
        ));
        assert_eq!(
            ProblemInstance::new(3, 2, &[0.5, 0.4]),
            Err(InstanceError::TooFewChannels {
                sources: 3,
                channels: 2
            })
        );
        assert_eq!(ProblemInstance::new(0, 1, &[0.5]), Err(InstanceError::Empty));
        assert!(matches!(
            ProblemInstance::new(1, 2, &[0.5]),
            Err(InstanceError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let inst = ProblemInstance::new(2, 3, &[0.2, 0.9, 0.5]).unwrap();
        assert_eq!(inst.mu(), &[0.9, 0.5, 0.2]);
        assert!((inst.delta() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn equidistant_grid() {
        assert_eq!(
            equidistant_mu(7, 0.9, 0.1),
            vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3]
        );
    }

    #[test]
    fn policy_names_roundtrip() {
        for p in PolicyKind::ALL {
            assert_eq!(p.name().parse::<PolicyKind>().unwrap(), p);
            let json = serde_json::to_string(&p).unwrap();
            assert_eq!(json, format!("\"{}\"", p.name()));
        }
    }

    proptest! {
        #[test]
        fn sorting_is_a_permutation(raw in proptest::collection::btree_set(1u32..999, 1..8), m in 1usize..8) {
            let mu: Vec<f64> = raw.iter().rev().map(|&v| v as f64 / 1000.0).collect();
            let mut shuffled = mu.clone();
            shuffled.reverse();
            let n = mu.len();
            let m = m.min(n);
            let inst = ProblemInstance::new(m, n, &shuffled).unwrap();
            prop_assert_eq!(inst.mu(), &mu[..]);
            prop_assert!(inst.mu().windows(2).all(|w| w[0] > w[1]));
            prop_assert_eq!(inst.delta(), min_gap(&inst.mu()[..m]));
            prop_assert_eq!(inst.mu_min(), *inst.mu().last().unwrap());
        }
    }
}
