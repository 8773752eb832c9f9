//! Storage of the bag-of-words models in the binary container.

use serde::{Deserialize, Serialize};

use crate::container::{Container, Tensor, TensorData};
use crate::corpus::BinaryLabel;
use crate::distribution::ProbabilityDistribution;
use crate::error::{Error, Result};
use crate::features::SparseCountVector;

use super::{predict_mnb, predict_rf, predict_svm, DecisionTree, ForestParams, MnbModel, Node, RfModel, SvmHyper, SvmModel};

#[derive(Debug, Clone, PartialEq)]
pub enum ClassicalModel {
    Mnb(MnbModel),
    Svm(SvmModel),
    Rf(RfModel),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    vocab_fingerprint: String,
    dimension: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    smoothing: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    svm: Option<SvmHyper>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    forest: Option<ForestParams>,
}

const LEAF: u32 = u32::MAX;

impl ClassicalModel {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassicalModel::Mnb(_) => "mnb",
            ClassicalModel::Svm(_) => "svm",
            ClassicalModel::Rf(_) => "rf",
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            ClassicalModel::Mnb(m) => m.dimension(),
            ClassicalModel::Svm(m) => m.weights.len(),
            ClassicalModel::Rf(m) => m.dimension,
        }
    }

    /// Label plus class probabilities where the model has them (the SVM only
    /// has a margin).
    pub fn predict(&self, x: &SparseCountVector) -> Result<(BinaryLabel, Option<ProbabilityDistribution>)> {
        match self {
            ClassicalModel::Mnb(m) => predict_mnb(m, x).map(|p| (p.argmax(), Some(p))),
            ClassicalModel::Svm(m) => predict_svm(m, x).map(|(label, _)| (label, None)),
            ClassicalModel::Rf(m) => predict_rf(m, x).map(|p| (p.argmax(), Some(p))),
        }
    }

    pub fn to_container(&self, vocab_fingerprint: &str) -> Container {
        let mut meta = Meta {
            vocab_fingerprint: vocab_fingerprint.to_string(),
            dimension: self.dimension(),
            smoothing: None,
            svm: None,
            forest: None,
        };
        let mut tensors = Vec::new();
        match self {
            ClassicalModel::Mnb(m) => {
                meta.smoothing = Some(m.smoothing);
                let d = m.dimension();
                tensors.push(Tensor::new("log_priors", vec![2], TensorData::F64(m.log_priors.to_vec())));
                tensors.push(Tensor::new(
                    "log_likelihoods",
                    vec![2, d],
                    TensorData::F64(m.log_likelihoods.concat()),
                ));
            }
            ClassicalModel::Svm(m) => {
                meta.svm = Some(m.hyper);
                tensors.push(Tensor::new("weights", vec![m.weights.len()], TensorData::F64(m.weights.clone())));
                tensors.push(Tensor::new("bias", vec![1], TensorData::F64(vec![m.bias])));
            }
            ClassicalModel::Rf(m) => {
                meta.forest = Some(m.params);
                let mut offsets = vec![0u64];
                let (mut feature, mut threshold, mut left, mut right, mut counts) =
                    (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
                for tree in &m.trees {
                    for node in &tree.nodes {
                        match node {
                            Node::Split {
                                feature: f,
                                threshold: t,
                                left: l,
                                right: r,
                            } => {
                                feature.push(*f as u32);
                                threshold.push(*t);
                                left.push(*l as u32);
                                right.push(*r as u32);
                                counts.extend([0, 0]);
                            }
                            Node::Leaf { counts: c } => {
                                feature.push(LEAF);
                                threshold.push(0.0);
                                left.push(0);
                                right.push(0);
                                counts.extend(c);
                            }
                        }
                    }
                    offsets.push(feature.len() as u64);
                }
                let n = feature.len();
                tensors.push(Tensor::new("tree_offsets", vec![offsets.len()], TensorData::U64(offsets)));
                tensors.push(Tensor::new("feature", vec![n], TensorData::U32(feature)));
                tensors.push(Tensor::new("threshold", vec![n], TensorData::F64(threshold)));
                tensors.push(Tensor::new("left", vec![n], TensorData::U32(left)));
                tensors.push(Tensor::new("right", vec![n], TensorData::U32(right)));
                tensors.push(Tensor::new("leaf_counts", vec![n, 2], TensorData::U64(counts)));
            }
        }
        let mut c = Container::new(self.kind(), serde_json::to_value(meta).expect("metadata serializes"));
        c.tensors = tensors;
        c
    }

    /// Returns the model and the fingerprint of its bag-of-words vocabulary.
    pub fn from_container(c: &Container) -> Result<(Self, String)> {
        let meta: Meta = c.metadata_as()?;
        let d = meta.dimension;
        let bad = |m: &str| Error::Checkpoint(format!("{} model: {m}", c.kind));
        let model = match c.kind.as_str() {
            "mnb" => {
                let priors = c.f64s("log_priors")?;
                let ll = c.f64s("log_likelihoods")?;
                if priors.len() != 2 || ll.len() != 2 * d {
                    return Err(bad("tensor sizes disagree with the dimension"));
                }
                ClassicalModel::Mnb(MnbModel {
                    log_priors: [priors[0], priors[1]],
                    log_likelihoods: [ll[..d].to_vec(), ll[d..].to_vec()],
                    smoothing: meta.smoothing.ok_or_else(|| bad("missing smoothing"))?,
                })
            }
            "svm" => {
                let weights = c.f64s("weights")?;
                let bias = c.f64s("bias")?;
                if weights.len() != d || bias.len() != 1 {
                    return Err(bad("tensor sizes disagree with the dimension"));
                }
                ClassicalModel::Svm(SvmModel {
                    weights: weights.to_vec(),
                    bias: bias[0],
                    hyper: meta.svm.ok_or_else(|| bad("missing hyperparameters"))?,
                })
            }
            "rf" => {
                let offsets = c.u64s("tree_offsets")?;
                let feature = c.u32s("feature")?;
                let threshold = c.f64s("threshold")?;
                let left = c.u32s("left")?;
                let right = c.u32s("right")?;
                let counts = c.u64s("leaf_counts")?;
                let n = feature.len();
                if [threshold.len(), left.len(), right.len(), counts.len() / 2].iter().any(|&l| l != n)
                    || offsets.first() != Some(&0)
                    || offsets.last() != Some(&(n as u64))
                    || offsets.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(bad("inconsistent tree tables"));
                }
                let mut trees = Vec::with_capacity(offsets.len() - 1);
                for w in offsets.windows(2) {
                    let (start, end) = (w[0] as usize, w[1] as usize);
                    let size = end - start;
                    let nodes = (start..end)
                        .map(|i| {
                            if feature[i] == LEAF {
                                Ok(Node::Leaf {
                                    counts: [counts[2 * i], counts[2 * i + 1]],
                                })
                            } else if (feature[i] as usize) < d && (left[i] as usize) < size && (right[i] as usize) < size {
                                Ok(Node::Split {
                                    feature: feature[i] as usize,
                                    threshold: threshold[i],
                                    left: left[i] as usize,
                                    right: right[i] as usize,
                                })
                            } else {
                                Err(bad("node index out of range"))
                            }
                        })
                        .collect::<Result<Vec<_>>>()?;
                    trees.push(DecisionTree { nodes });
                }
                ClassicalModel::Rf(RfModel {
                    trees,
                    params: meta.forest.ok_or_else(|| bad("missing forest parameters"))?,
                    dimension: d,
                })
            }
            other => return Err(Error::Checkpoint(format!("unknown classical model kind {other:?}"))),
        };
        Ok((model, meta.vocab_fingerprint))
    }
}

#[cfg(test)]
mod tests {
    use super::super::{train_mnb, train_random_forest, train_svm_sgd};
    use super::*;

    fn data() -> (Vec<SparseCountVector>, Vec<BinaryLabel>) {
        let x: Vec<_> = (0..24u32)
            .map(|i| SparseCountVector::from_dense(&[i % 3, (i * 7) % 5, i % 2, (i / 4) % 3]))
            .collect();
        let y = (0..24).map(|i| if i % 3 == 1 || i % 5 == 0 { BinaryLabel::Off } else { BinaryLabel::Not }).collect();
        (x, y)
    }

    #[test]
    fn all_kinds_round_trip_exactly() {
        let (x, y) = data();
        let models = [
            ClassicalModel::Mnb(train_mnb(&x, &y, 1.0).unwrap()),
            ClassicalModel::Svm(train_svm_sgd(&x, &y, SvmHyper::default()).unwrap()),
            ClassicalModel::Rf(train_random_forest(&x, &y, ForestParams { n_trees: 9, seed: 2, ..Default::default() }).unwrap()),
        ];
        for m in models {
            let bytes = m.to_container("fp").to_bytes().unwrap();
            let (back, fp) = ClassicalModel::from_container(&Container::from_bytes(&bytes).unwrap()).unwrap();
            assert_eq!(fp, "fp");
            assert_eq!(back, m);
            for v in &x {
                assert_eq!(back.predict(v).unwrap(), m.predict(v).unwrap());
            }
        }
    }
}
