use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::error::{Error, Result};

/// Class probabilities indexed by [`BinaryLabel::index`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityDistribution {
    probs: [f64; BinaryLabel::COUNT],
}

impl ProbabilityDistribution {
    pub fn new(probs: [f64; BinaryLabel::COUNT]) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("{probs:?} is not a probability distribution")));
        }
        Ok(ProbabilityDistribution { probs })
    }

    pub fn uniform() -> Self {
        ProbabilityDistribution {
            probs: [1.0 / BinaryLabel::COUNT as f64; BinaryLabel::COUNT],
        }
    }

    /// Numerically stable softmax.
    pub fn from_logits(logits: [f64; BinaryLabel::COUNT]) -> Self {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps = logits.map(|l| (l - max).exp());
        let sum: f64 = exps.iter().sum();
        ProbabilityDistribution {
            probs: exps.map(|e| e / sum),
        }
    }

    /// Normalize non-negative weights (counts, averaged frequencies).
    pub(crate) fn from_weights(weights: [f64; BinaryLabel::COUNT]) -> Self {
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return ProbabilityDistribution::uniform();
        }
        ProbabilityDistribution {
            probs: weights.map(|w| w / sum),
        }
    }

    /// Component-wise mean of `members`, without renormalization.
    ///
    /// Each class column is sorted before an incremental mean, so the result
    /// does not depend on member order and identical members average to
    /// themselves exactly.
    pub(crate) fn mean(members: &[ProbabilityDistribution]) -> Self {
        let probs = std::array::from_fn(|c| {
            let mut column: Vec<f64> = members.iter().map(|m| m.probs[c]).collect();
            column.sort_by(f64::total_cmp);
            column
                .iter()
                .enumerate()
                .fold(0.0, |mean, (k, &p)| mean + (p - mean) / (k + 1) as f64)
        });
        ProbabilityDistribution { probs }
    }

    pub fn probs(&self) -> &[f64; BinaryLabel::COUNT] {
        &self.probs
    }

    pub fn prob(&self, label: BinaryLabel) -> f64 {
        self.probs[label.index()]
    }

    /// Most probable class; exact ties go to the lower index (`NOT`).
    pub fn argmax(&self) -> BinaryLabel {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        BinaryLabel::from_index(best).unwrap()
    }
}
