use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::BinaryLabel;
use crate::error::{Error, Result};
use crate::features::SparseCountVector;
use crate::rng::rng_for;

use super::check_training_set;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmHyper {
    /// L2 regularization strength.
    pub alpha: f64,
    /// Seeds the per-epoch shuffling.
    pub seed: u64,
    /// Passes over the training data.
    pub epochs: usize,
}

impl Default for SvmHyper {
    fn default() -> Self {
        SvmHyper {
            alpha: 0.001,
            seed: 5,
            epochs: 15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: SvmHyper,
}

/// Hinge loss with L2 penalty, plain SGD. The step size follows
/// `1 / (alpha * (t + t0))` with `t0 = 1 / alpha`, `t` counting updates.
/// The weight vector is kept as `scale * v` so the decay step is O(1).
pub fn train_svm_sgd(x: &[SparseCountVector], y: &[BinaryLabel], hyper: SvmHyper) -> Result<SvmModel> {
    if !(hyper.alpha > 0.0 && hyper.alpha.is_finite()) || hyper.epochs == 0 {
        return Err(Error::InvalidArgument("alpha must be positive and epochs at least 1".into()));
    }
    let dimension = check_training_set(x, y)?;
    let targets: Vec<f64> = y.iter().map(|l| if *l == BinaryLabel::Off { 1.0 } else { -1.0 }).collect();

    let mut v = vec![0.0f64; dimension];
    let mut scale = 1.0f64;
    let mut bias = 0.0f64;
    let t0 = 1.0 / hyper.alpha;
    let mut t = 0.0f64;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = rng_for(hyper.seed, &[0x5F3]);

    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            let eta = 1.0 / (hyper.alpha * (t + t0));
            let dot: f64 = x[i].entries().iter().map(|&(f, c)| v[f] * c as f64).sum();
            let margin = targets[i] * (scale * dot + bias);

            scale *= (1.0 - eta * hyper.alpha).max(0.0);
            if scale < 1e-9 {
                if scale == 0.0 {
                    v.iter_mut().for_each(|w| *w = 0.0);
                } else {
                    v.iter_mut().for_each(|w| *w *= scale);
                }
                scale = 1.0;
            }
            if margin < 1.0 {
                let step = eta * targets[i] / scale;
                for &(f, c) in x[i].entries() {
                    v[f] += step * c as f64;
                }
                bias += eta * targets[i];
            }
            t += 1.0;
        }
    }
    let weights: Vec<f64> = v.iter().map(|w| w * scale).collect();
    if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: hyper.epochs, batch: 0 });
    }
    Ok(SvmModel { weights, bias, hyper })
}

impl SvmModel {
    /// `w.x + b` for a dense real-valued input.
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// `OFF` when `w.x + b > 0`; a zero margin is `NOT`.
pub fn predict_svm(model: &SvmModel, x: &SparseCountVector) -> Result<(BinaryLabel, f64)> {
    x.check_dimension(model.weights.len())?;
    let margin = x.entries().iter().map(|&(f, c)| model.weights[f] * c as f64).sum::<f64>() + model.bias;
    let label = if margin > 0.0 { BinaryLabel::Off } else { BinaryLabel::Not };
    Ok((label, margin))
}
