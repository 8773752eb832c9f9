//! Central finite-difference check of the classification-loss gradient.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::rng::rng_for;
use crate::textprep::bpe::{CLS, FIRST_BYTE, PAD, SEP};

use super::model::{backward, classifier_loss, encode, Dropout};
use super::weights::{ClassifierHead, EncoderWeights};
use super::EncoderConfig;

pub const STEP: f64 = 1e-5;
/// Lower bound on the relative-error denominator, so near-zero gradients are
/// compared in absolute terms instead of producing meaningless ratios.
pub const DENOMINATOR_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Tensor holding the worst element.
    pub worst_tensor: String,
    pub parameters_checked: usize,
}

/// Configuration small enough to difference every parameter.
pub fn tiny_config() -> EncoderConfig {
    EncoderConfig {
        d_model: 8,
        heads: 2,
        layers: 1,
        ff_dim: 16,
        max_len: 8,
        vocab_size: 16,
        dropout: 0.1,
    }
}

pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(DENOMINATOR_FLOOR)
}

struct Problem {
    ids: Vec<u32>,
    keys: usize,
    label: usize,
    seed: u64,
}

impl Problem {
    fn loss(&self, w: &EncoderWeights<f64>, head: &ClassifierHead<f64>, grads: Option<(&mut EncoderWeights<f64>, &mut ClassifierHead<f64>)>) -> f64 {
        let mut rng = rng_for(self.seed, &[0x6C]);
        let dropout = (w.config.dropout > 0.0).then(|| Dropout {
            p: w.config.dropout,
            rng: &mut rng,
        });
        let trace = encode(w, &self.ids, self.keys, dropout);
        let mut scratch = ClassifierHead::zeros(w.config.d_model);
        match grads {
            Some((g, hg)) => {
                let (loss, _, d_hidden) = classifier_loss(head, &trace, self.label, hg);
                backward(w, &trace, &d_hidden, g);
                loss
            }
            None => classifier_loss(head, &trace, self.label, &mut scratch).0,
        }
    }
}

/// Compare the analytic gradient of the cross-entropy loss with respect to
/// every parameter against central differences at `f64`. The input has
/// trailing padding and dropout is active with a fixed mask, so both masking
/// paths are exercised.
pub fn grad_check(config: &EncoderConfig, seed: u64) -> Result<GradCheckReport> {
    let mut w = EncoderWeights::<f64>::init(config, seed)?;
    let mut head = ClassifierHead::<f64>::init(config, seed);
    let mut rng = rng_for(seed, &[0x6C, 1]);
    let keys = (config.max_len - 1).max(3).min(config.max_len);
    let mut ids = vec![CLS];
    ids.extend((1..keys - 1).map(|_| rng.random_range(FIRST_BYTE..config.vocab_size as u32)));
    ids.push(SEP);
    ids.resize(config.max_len, PAD);
    let problem = Problem {
        ids,
        keys,
        label: rng.random_range(0..2),
        seed,
    };

    let mut grads = w.zeros_like();
    let mut head_grads = ClassifierHead::zeros(config.d_model);
    problem.loss(&w, &head, Some((&mut grads, &mut head_grads)));

    let names: Vec<String> = EncoderWeights::<f64>::shapes(config)
        .into_iter()
        .map(|(n, _)| n)
        .chain(["head.weight".to_string(), "head.bias".to_string()])
        .collect();
    let analytic: Vec<Vec<f64>> = grads
        .tensors()
        .into_iter()
        .chain(head_grads.tensors())
        .cloned()
        .collect();
    let encoder_tensors = w.tensors().len();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_tensor: String::new(),
        parameters_checked: 0,
    };
    for (t, name) in names.iter().enumerate() {
        for i in 0..analytic[t].len() {
            let eval = |delta: f64, w: &mut EncoderWeights<f64>, head: &mut ClassifierHead<f64>| {
                let slot = if t < encoder_tensors {
                    &mut w.tensors_mut()[t][i]
                } else {
                    &mut head.tensors_mut()[t - encoder_tensors][i]
                };
                let original = *slot;
                *slot = original + delta;
                let loss = problem.loss(w, head, None);
                let slot = if t < encoder_tensors {
                    &mut w.tensors_mut()[t][i]
                } else {
                    &mut head.tensors_mut()[t - encoder_tensors][i]
                };
                *slot = original;
                loss
            };
            let plus = eval(STEP, &mut w, &mut head);
            let minus = eval(-STEP, &mut w, &mut head);
            let numeric = (plus - minus) / (2.0 * STEP);
            let err = relative_error(analytic[t][i], numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_tensor = name.clone();
            }
            report.parameters_checked += 1;
        }
    }
    Ok(report)
}
