use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::distribution::ProbabilityDistribution;
use crate::error::{Error, Result};
use crate::features::SparseCountVector;

use super::check_training_set;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MnbModel {
    pub log_priors: [f64; 2],
    /// `log_likelihoods[c][f]` = ln P(feature f | class c).
    pub log_likelihoods: [Vec<f64>; 2],
    pub smoothing: f64,
}

impl MnbModel {
    pub fn dimension(&self) -> usize {
        self.log_likelihoods[0].len()
    }
}

/// Priors from class frequencies; likelihoods with additive smoothing.
pub fn train_mnb(x: &[SparseCountVector], y: &[BinaryLabel], smoothing: f64) -> Result<MnbModel> {
    if !(smoothing > 0.0 && smoothing.is_finite()) {
        return Err(Error::InvalidArgument(format!("smoothing must be positive, got {smoothing}")));
    }
    let dimension = check_training_set(x, y)?;
    let mut docs = [0usize; 2];
    let mut feature_counts = [vec![0.0f64; dimension], vec![0.0f64; dimension]];
    for (v, label) in x.iter().zip(y) {
        let c = label.index();
        docs[c] += 1;
        for &(i, n) in v.entries() {
            feature_counts[c][i] += n as f64;
        }
    }
    let n = x.len() as f64;
    let log_priors = docs.map(|d| (d as f64 / n).ln());
    let log_likelihoods = feature_counts.map(|counts| {
        let total: f64 = counts.iter().sum::<f64>() + smoothing * dimension as f64;
        counts.iter().map(|&c| ((c + smoothing) / total).ln()).collect()
    });
    Ok(MnbModel {
        log_priors,
        log_likelihoods,
        smoothing,
    })
}

/// Posterior over {NOT, OFF}, normalized in log space.
pub fn predict_mnb(model: &MnbModel, x: &SparseCountVector) -> Result<ProbabilityDistribution> {
    x.check_dimension(model.dimension())?;
    let scores = [0, 1].map(|c| {
        model.log_priors[c]
            + x.entries()
                .iter()
                .map(|&(i, n)| n as f64 * model.log_likelihoods[c][i])
                .sum::<f64>()
    });
    Ok(ProbabilityDistribution::from_logits(scores))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(dense: &[u32]) -> SparseCountVector {
        SparseCountVector::from_dense(dense)
    }

    #[test]
    fn likelihoods_normalize() {
        let x = [v(&[1, 0, 2]), v(&[0, 3, 0]), v(&[1, 1, 1])];
        let y = [BinaryLabel::Not, BinaryLabel::Off, BinaryLabel::Off];
        let m = train_mnb(&x, &y, 1.0).unwrap();
        for c in 0..2 {
            let s: f64 = m.log_likelihoods[c].iter().map(|l| l.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_vector_gives_priors() {
        let x = [v(&[1, 0]), v(&[0, 1]), v(&[0, 2])];
        let y = [BinaryLabel::Not, BinaryLabel::Off, BinaryLabel::Off];
        let m = train_mnb(&x, &y, 1.0).unwrap();
        let p = predict_mnb(&m, &v(&[0, 0])).unwrap();
        assert!((p.prob(BinaryLabel::Not) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_corpus_has_equal_priors() {
        let x = [v(&[2, 0]), v(&[0, 2])];
        let m = train_mnb(&x, &[BinaryLabel::Not, BinaryLabel::Off], 1.0).unwrap();
        assert_eq!(m.log_priors[0], m.log_priors[1]);
    }

    #[test]
    fn errors() {
        let x = [v(&[1, 0]), v(&[0, 1])];
        assert!(train_mnb(&x, &[BinaryLabel::Not, BinaryLabel::Not], 1.0).is_err());
        assert!(train_mnb(&x, &[BinaryLabel::Not], 1.0).is_err());
        assert!(train_mnb(&x, &[BinaryLabel::Not, BinaryLabel::Off], 0.0).is_err());
        let m = train_mnb(&x, &[BinaryLabel::Not, BinaryLabel::Off], 1.0).unwrap();
        assert!(matches!(predict_mnb(&m, &v(&[1, 0, 0])), Err(Error::DimensionMismatch { .. })));
    }

    /// Posterior computed by direct multiplication of probabilities.
    fn oracle(x: &[Vec<u32>], y: &[usize], probe: &[u32]) -> f64 {
        let dim = probe.len() as f64;
        let mut score = [0.0f64; 2];
        for c in 0..2 {
            let docs: Vec<&Vec<u32>> = x.iter().zip(y).filter(|(_, &l)| l == c).map(|(d, _)| d).collect();
            let mut p = docs.len() as f64 / x.len() as f64;
            let total: u32 = docs.iter().flat_map(|d| d.iter()).sum();
            for (f, &n) in probe.iter().enumerate() {
                let count: u32 = docs.iter().map(|d| d[f]).sum();
                p *= ((count as f64 + 1.0) / (total as f64 + dim)).powi(n as i32);
            }
            score[c] = p;
        }
        score[1] / (score[0] + score[1])
    }

    #[test]
    fn hand_computed_posterior() {
        // NOT: counts (2,0) -> P = (3/4, 1/4); OFF: counts (0,1) -> P = (1/3, 2/3)
        let x = [v(&[2, 0]), v(&[0, 1])];
        let m = train_mnb(&x, &[BinaryLabel::Not, BinaryLabel::Off], 1.0).unwrap();
        let p = predict_mnb(&m, &v(&[0, 1])).unwrap();
        let expected = (2.0 / 3.0) / (2.0 / 3.0 + 1.0 / 4.0);
        assert!((p.prob(BinaryLabel::Off) - expected).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn matches_direct_product_oracle(
            rows in proptest::collection::vec((proptest::collection::vec(0u32..4, 3), 0usize..2), 2..10),
            probe in proptest::collection::vec(0u32..4, 3),
        ) {
            let y: Vec<usize> = rows.iter().map(|r| r.1).collect();
            proptest::prop_assume!(y.contains(&0) && y.contains(&1));
            let dense: Vec<Vec<u32>> = rows.iter().map(|r| r.0.clone()).collect();
            let x: Vec<_> = dense.iter().map(|r| v(r)).collect();
            let labels: Vec<_> = y.iter().map(|&i| BinaryLabel::from_index(i).unwrap()).collect();
            let m = train_mnb(&x, &labels, 1.0).unwrap();
            let p = predict_mnb(&m, &v(&probe)).unwrap();
            proptest::prop_assert!((p.prob(BinaryLabel::Off) - oracle(&dense, &y, &probe)).abs() < 1e-9);
        }
    }
}
