//! Outcome distributions, run modes and sampling tolerances.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::engine::measure::draw_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

/// Exact branch algebra, or Monte Carlo with a fixed trial count and seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Exact,
    Sampled { trials: u64, seed: u64 },
}

impl RunMode {
    pub fn mode(&self) -> Mode {
        match self {
            RunMode::Exact => Mode::Exact,
            RunMode::Sampled { .. } => Mode::Sampled,
        }
    }

    pub fn trials(&self) -> Option<u64> {
        match self {
            RunMode::Exact => None,
            RunMode::Sampled { trials, .. } => Some(*trials),
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            RunMode::Exact => None,
            RunMode::Sampled { seed, .. } => Some(*seed),
        }
    }
}

/// Label for an outcome record, e.g. `[0, 1]` → `"0,1"`; the empty record is `"-"`.
pub fn record_label(record: &[usize]) -> String {
    if record.is_empty() {
        "-".into()
    } else {
        record
            .iter()
            .map(|k| k.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Probabilities over a fixed, ordered list of outcome records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    pub records: Vec<Vec<usize>>,
    pub probabilities: Vec<f64>,
    /// Observed counts when the distribution was estimated by sampling.
    pub counts: Option<Vec<u64>>,
}

impl OutcomeDistribution {
    pub fn exact(records: Vec<Vec<usize>>, probabilities: Vec<f64>) -> Self {
        Self {
            records,
            probabilities,
            counts: None,
        }
    }

    /// Normalises nonnegative weights; returns `None` if they sum to zero.
    pub fn from_weights(records: Vec<Vec<usize>>, weights: &[f64]) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return None;
        }
        Some(Self::exact(
            records,
            weights.iter().map(|w| w / total).collect(),
        ))
    }

    pub fn from_counts(records: Vec<Vec<usize>>, counts: Vec<u64>) -> Self {
        let total: u64 = counts.iter().sum();
        let probabilities = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
            .collect();
        Self {
            records,
            probabilities,
            counts: Some(counts),
        }
    }

    pub fn get(&self, record: &[usize]) -> Option<f64> {
        self.records
            .iter()
            .position(|r| r == record)
            .map(|k| self.probabilities[k])
    }

    pub fn total_count(&self) -> Option<u64> {
        self.counts.as_ref().map(|c| c.iter().sum())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.records, other.records, "record sets differ");
        self.probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn tv_distance(&self, other: &Self) -> f64 {
        assert_eq!(self.records, other.records, "record sets differ");
        0.5 * self
            .probabilities
            .iter()
            .zip(&other.probabilities)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    /// Draws `trials` samples; the result carries counts.
    pub fn sample<R: Rng + ?Sized>(&self, trials: u64, rng: &mut R) -> Self {
        let mut counts = vec![0u64; self.records.len()];
        for _ in 0..trials {
            counts[draw_index(&self.probabilities, rng)] += 1;
        }
        Self::from_counts(self.records.clone(), counts)
    }

    /// Largest standardised deviation of observed counts from `expected`,
    /// in units of the binomial standard deviation (floored so that exact
    /// zero/one probabilities demand exact agreement within one count).
    pub fn max_sigma_deviation(&self, expected: &Self) -> f64 {
        let counts = self.counts.as_ref().expect("sampled distribution");
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let n = n as f64;
        counts
            .iter()
            .zip(&expected.probabilities)
            .map(|(&c, &p)| {
                let sd = (n * p * (1.0 - p)).sqrt().max(1.0);
                (c as f64 - n * p).abs() / sd
            })
            .fold(0.0, f64::max)
    }
}

/// |observed/n − p| within `k` binomial standard deviations.
pub fn within_binomial_sigma(successes: u64, trials: u64, p: f64, k: f64) -> bool {
    if trials == 0 {
        return false;
    }
    let n = trials as f64;
    let sd = (n * p * (1.0 - p)).sqrt().max(1.0);
    (successes as f64 - n * p).abs() <= k * sd
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(record_label(&[]), "-");
        assert_eq!(record_label(&[0, 3]), "0,3");
    }

    #[test]
    fn tv_of_disjoint_distributions() {
        let r = vec![vec![0], vec![1]];
        let a = OutcomeDistribution::exact(r.clone(), vec![1.0, 0.0]);
        let b = OutcomeDistribution::exact(r, vec![0.0, 1.0]);
        assert_eq!(a.tv_distance(&b), 1.0);
    }

    #[test]
    fn binomial_band() {
        assert!(within_binomial_sigma(2500, 10_000, 0.25, 5.0));
        assert!(!within_binomial_sigma(3000, 10_000, 0.25, 5.0));
    }
}
