/// Local per-channel statistics of one source.
///
/// Successes and acquired plays are stored as integers, so `mu_hat * count`
/// is exactly the success count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorState {
    successes: Vec<u64>,
    plays: Vec<u64>,
}

impl EstimatorState {
    pub fn new(channels: usize) -> Self {
        Self {
            successes: vec![0; channels],
            plays: vec![0; channels],
        }
    }

    /// Builds a state from explicit `(successes, plays)` pairs.
    pub fn from_counts(counts: &[(u64, u64)]) -> Self {
        assert!(counts.iter().all(|&(s, p)| s <= p), "successes exceed plays");
        Self {
            successes: counts.iter().map(|c| c.0).collect(),
            plays: counts.iter().map(|c| c.1).collect(),
        }
    }

    pub fn channels(&self) -> usize {
        self.plays.len()
    }

    /// Empirical success rate; 0 for a channel never acquired.
    #[inline]
    pub fn mu_hat(&self, n: usize) -> f64 {
        match self.plays[n] {
            0 => 0.0,
            p => self.successes[n] as f64 / p as f64,
        }
    }

    #[inline]
    pub fn plays(&self, n: usize) -> u64 {
        self.plays[n]
    }

    #[inline]
    pub fn successes(&self, n: usize) -> u64 {
        self.successes[n]
    }

    /// Beta posterior parameter `alpha = mu_hat * T + 1`.
    #[inline]
    pub fn alpha(&self, n: usize) -> f64 {
        self.successes[n] as f64 + 1.0
    }

    /// Beta posterior parameter `beta = (1 - mu_hat) * T + 1`.
    #[inline]
    pub fn beta(&self, n: usize) -> f64 {
        (self.plays[n] - self.successes[n]) as f64 + 1.0
    }

    /// `(alpha + beta) / alpha`, the age a source would settle at on channel
    /// `n` if its posterior mean were exact.
    #[inline]
    pub fn age_ratio(&self, n: usize) -> f64 {
        (self.plays[n] as f64 + 2.0) / self.alpha(n)
    }

    /// Records the outcome of one slot. Slots in which the channel was lost
    /// to a collision leave the statistics untouched.
    #[inline]
    pub fn observe(&mut self, chosen: usize, acquired: bool, success: bool) {
        if !acquired {
            return;
        }
        self.plays[chosen] += 1;
        self.successes[chosen] += u64::from(success);
    }
}
