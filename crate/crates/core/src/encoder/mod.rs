//! A small pre-norm transformer encoder with a `[CLS]` softmax classifier,
//! masked-language-model pretraining and manual backpropagation.

mod adam;
mod gradcheck;
mod model;
mod ops;
mod weights;

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledDataset;
use crate::distribution::ProbabilityDistribution;
use crate::error::{Error, Result};
use crate::rng::rng_for;
use crate::textprep::bpe::{encode, FIRST_BYTE, MASK};
use crate::textprep::{SubwordVocabulary, TokenIdSequence};

use adam::Adam;
use model::{backward, classifier_loss, encode as run_encoder, mlm_loss, Dropout};

pub use gradcheck::{grad_check, tiny_config, GradCheckReport};
pub use weights::{ClassifierHead, EncoderWeights, LayerWeights, NamedTensor, Scalar, LAYER_TENSORS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    /// Taken from the tokenizer; 0 means "not yet bound".
    pub vocab_size: usize,
    pub dropout: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            d_model: 64,
            heads: 4,
            layers: 2,
            ff_dim: 128,
            max_len: 64,
            vocab_size: 0,
            dropout: 0.1,
        }
    }
}

impl EncoderConfig {
    pub fn with_vocab(mut self, vocab_size: usize) -> Self {
        self.vocab_size = vocab_size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.d_model == 0 || self.heads == 0 || self.d_model % self.heads != 0 {
            return bad(format!("d_model {} must be a positive multiple of heads {}", self.d_model, self.heads));
        }
        if self.max_len < 3 {
            return bad(format!("max_len must be at least 3, got {}", self.max_len));
        }
        if self.vocab_size <= MASK as usize {
            return bad(format!("vocab_size {} does not cover the special tokens", self.vocab_size));
        }
        if self.ff_dim == 0 || self.layers == 0 {
            return bad("layers and ff_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainHyper {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            learning_rate: 1e-5,
            epochs: 3,
            batch_size: 16,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument("epochs and batch_size must be at least 1".into()));
        }
        Ok(())
    }

    fn adam<T: Scalar>(&self, sizes: impl IntoIterator<Item = usize>) -> Adam<T> {
        Adam::new(self.learning_rate, self.beta1, self.beta2, self.epsilon, sizes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Mlm,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Mlm => "mlm",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub split: Split,
    pub loss: f64,
    pub accuracy: f64,
}

/// `epoch<TAB>split<TAB>loss<TAB>accuracy` lines under a header row.
pub fn render_log(log: &[EpochLog]) -> String {
    let mut out = String::from("epoch\tsplit\tloss\taccuracy\n");
    for e in log {
        out.push_str(&format!("{}\t{}\t{}\t{}\n", e.epoch, e.split, e.loss, e.accuracy));
    }
    out
}

/// Final hidden states of one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderOutput {
    /// `[max_len × d_model]` row-major.
    pub hidden_states: Vec<f32>,
    pub d_model: usize,
}

impl EncoderOutput {
    /// State at position 0, the `[CLS]` token.
    pub fn h(&self) -> &[f32] {
        &self.hidden_states[..self.d_model]
    }

    pub fn row(&self, position: usize) -> &[f32] {
        &self.hidden_states[position * self.d_model..(position + 1) * self.d_model]
    }
}

#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub encoder: EncoderWeights,
    pub head: ClassifierHead,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Clone)]
pub struct MlmRun {
    pub encoder: EncoderWeights,
    pub log: Vec<EpochLog>,
}

pub fn init_encoder(config: &EncoderConfig, seed: u64) -> Result<EncoderWeights> {
    EncoderWeights::init(config, seed)
}

pub fn init_head(config: &EncoderConfig, seed: u64) -> ClassifierHead {
    ClassifierHead::init(config, seed)
}

fn check_ids<T: Scalar>(w: &EncoderWeights<T>, ids: &TokenIdSequence) -> Result<()> {
    let c = &w.config;
    if ids.max_len() > c.max_len {
        return Err(Error::DimensionMismatch {
            expected: c.max_len,
            found: ids.max_len(),
        });
    }
    if ids.attention_length == 0 || ids.attention_length > ids.max_len() {
        return Err(Error::InvalidArgument(format!(
            "attention length {} outside 1..={}",
            ids.attention_length,
            ids.max_len()
        )));
    }
    if let Some(&bad) = ids.ids.iter().find(|&&id| id as usize >= c.vocab_size) {
        return Err(Error::UnknownTokenId(bad));
    }
    Ok(())
}

fn check_head<T: Scalar>(w: &EncoderWeights<T>, head: &ClassifierHead<T>) -> Result<()> {
    if head.d_model() != w.config.d_model || head.bias.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: w.config.d_model,
            found: head.d_model(),
        });
    }
    Ok(())
}

/// Binds or verifies the tokenizer the weights belong to.
fn check_vocab<T: Scalar>(w: &EncoderWeights<T>, vocab: &SubwordVocabulary) -> Result<()> {
    if let Some(fp) = &w.vocab_fingerprint {
        if fp != vocab.fingerprint() {
            return Err(Error::FingerprintMismatch {
                expected: fp.clone(),
                found: vocab.fingerprint().to_string(),
            });
        }
    }
    if vocab.len() != w.config.vocab_size {
        return Err(Error::DimensionMismatch {
            expected: w.config.vocab_size,
            found: vocab.len(),
        });
    }
    Ok(())
}

const DROPOUT_STREAM: u64 = 0xD0;
const SHUFFLE_STREAM: u64 = 0x5F;
const MASK_STREAM: u64 = 0x3A5;

/// Full-length forward pass: every position is a query, `[PAD]` keys are
/// masked. Dropout is applied only in `train_mode`, from a generator keyed
/// by `seed`.
pub fn forward(
    w: &EncoderWeights,
    head: &ClassifierHead,
    ids: &TokenIdSequence,
    train_mode: bool,
    seed: u64,
) -> Result<(EncoderOutput, ProbabilityDistribution)> {
    check_ids(w, ids)?;
    check_head(w, head)?;
    let mut rng = rng_for(seed, &[DROPOUT_STREAM]);
    let dropout = (train_mode && w.config.dropout > 0.0).then(|| Dropout {
        p: w.config.dropout,
        rng: &mut rng,
    });
    let trace = run_encoder(w, &ids.ids, ids.attention_length, dropout);
    let output = EncoderOutput {
        hidden_states: trace.hidden,
        d_model: w.config.d_model,
    };
    let probs = classify_hidden(head, &output);
    Ok((output, probs))
}

/// The classifier reads only `h`, the `[CLS]` row.
pub fn classify_hidden(head: &ClassifierHead, output: &EncoderOutput) -> ProbabilityDistribution {
    ProbabilityDistribution::from_logits(head.logits(output.h()).map(f64::from))
}

/// Inference on the attended prefix only. Padding never influences `h`, so
/// this equals the `[CLS]` distribution of [`forward`] in eval mode.
pub fn predict_proba(w: &EncoderWeights, head: &ClassifierHead, ids: &TokenIdSequence) -> Result<ProbabilityDistribution> {
    check_ids(w, ids)?;
    check_head(w, head)?;
    let trace = run_encoder(w, &ids.ids[..ids.attention_length], ids.attention_length, None);
    let d = w.config.d_model;
    Ok(ProbabilityDistribution::from_logits(head.logits(&trace.hidden[..d]).map(f64::from)))
}

pub fn encode_dataset(vocab: &SubwordVocabulary, ds: &LabeledDataset, max_len: usize) -> Vec<TokenIdSequence> {
    ds.texts().map(|t| encode(vocab, t, max_len)).collect()
}

fn evaluate_split(
    w: &EncoderWeights,
    head: &ClassifierHead,
    seqs: &[TokenIdSequence],
    labels: &[usize],
) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for (ids, &y) in seqs.iter().zip(labels) {
        let p = predict_proba(w, head, ids)?;
        loss -= p.probs()[y].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(p.argmax().index() == y);
    }
    let n = seqs.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Fine-tune encoder and head on labeled documents with Adam and
/// cross-entropy. Documents are reshuffled every epoch; the log holds one
/// training row per epoch plus a validation row when `validation` is given.
pub fn train_classifier(
    w: &EncoderWeights,
    head: &ClassifierHead,
    train: &LabeledDataset,
    validation: Option<&LabeledDataset>,
    vocab: &SubwordVocabulary,
    hyper: &TrainHyper,
) -> Result<TrainedClassifier> {
    hyper.validate()?;
    check_vocab(w, vocab)?;
    check_head(w, head)?;
    if train.is_empty() {
        return Err(Error::dataset(&train.name, "no training documents"));
    }
    let max_len = w.config.max_len;
    let seqs = encode_dataset(vocab, train, max_len);
    let labels: Vec<usize> = train.labels()?.iter().map(|l| l.index()).collect();
    let val = match validation {
        Some(v) => Some((encode_dataset(vocab, v, max_len), v.labels()?.iter().map(|l| l.index()).collect::<Vec<_>>())),
        None => None,
    };

    let mut w = w.clone();
    w.vocab_fingerprint = Some(vocab.fingerprint().to_string());
    let mut head = head.clone();
    let mut grads = w.zeros_like();
    let mut head_grads = ClassifierHead::zeros(w.config.d_model);
    let sizes: Vec<usize> = w.tensors().iter().chain(head.tensors().iter()).map(|t| t.len()).collect();
    let mut adam = hyper.adam::<f32>(sizes);
    let mut log = Vec::new();
    let mut order: Vec<usize> = (0..seqs.len()).collect();

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng_for(hyper.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut dropout_rng = rng_for(hyper.seed, &[DROPOUT_STREAM, epoch as u64]);
        let mut epoch_loss = 0.0f64;
        let mut correct = 0usize;
        for (batch_index, batch) in order.chunks(hyper.batch_size).enumerate() {
            zero(&mut grads, &mut head_grads);
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let ids = &seqs[i];
                let n = ids.attention_length;
                let dropout = (w.config.dropout > 0.0).then(|| Dropout {
                    p: w.config.dropout,
                    rng: &mut dropout_rng,
                });
                let trace = run_encoder(&w, &ids.ids[..n], n, dropout);
                let (loss, p, d_hidden) = classifier_loss(&head, &trace, labels[i], &mut head_grads);
                backward(&w, &trace, &d_hidden, &mut grads);
                batch_loss += loss as f64;
                correct += usize::from((p[1] > p[0]) as usize == labels[i]);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            epoch_loss += batch_loss;
            let params: Vec<&mut Vec<f32>> = w.tensors_mut().into_iter().chain(head.tensors_mut()).collect();
            let g: Vec<&Vec<f32>> = grads.tensors().into_iter().chain(head_grads.tensors()).collect();
            adam.update(params, g, 1.0 / batch.len() as f32);
        }
        if !w.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: 0 });
        }
        log.push(EpochLog {
            epoch,
            split: Split::Train,
            loss: epoch_loss / seqs.len() as f64,
            accuracy: correct as f64 / seqs.len() as f64,
        });
        if let Some((vseqs, vlabels)) = &val {
            let (loss, accuracy) = evaluate_split(&w, &head, vseqs, vlabels)?;
            log.push(EpochLog {
                epoch,
                split: Split::Validation,
                loss,
                accuracy,
            });
        }
    }
    Ok(TrainedClassifier { encoder: w, head, log })
}

fn zero<T: Scalar>(grads: &mut EncoderWeights<T>, head_grads: &mut ClassifierHead<T>) {
    for t in grads.tensors_mut().into_iter().chain(head_grads.tensors_mut()) {
        t.iter_mut().for_each(|x| *x = T::zero());
    }
}

/// Masked sequence plus `(position, original id)` targets.
pub type MaskedSequence = (TokenIdSequence, Vec<(usize, u32)>);

/// Select exactly `max(1, round(rate·n))` of the `n` non-special positions;
/// each selected token becomes `[MASK]` with probability 0.8, a random
/// regular id with probability 0.1, and stays unchanged otherwise.
pub fn mask_tokens(ids: &TokenIdSequence, rate: f64, vocab_size: usize, seed: u64) -> Result<MaskedSequence> {
    mask_with(ids, rate, vocab_size, &mut rng_for(seed, &[MASK_STREAM]))
}

fn mask_with(ids: &TokenIdSequence, rate: f64, vocab_size: usize, rng: &mut impl Rng) -> Result<MaskedSequence> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("mask rate must be in [0, 1], got {rate}")));
    }
    if vocab_size <= FIRST_BYTE as usize {
        return Err(Error::InvalidArgument("vocabulary has no regular tokens".into()));
    }
    let candidates: Vec<usize> = (0..ids.attention_length).filter(|&i| ids.ids[i] >= FIRST_BYTE).collect();
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("sequence has no maskable tokens".into()));
    }
    let count = ((rate * candidates.len() as f64).round() as usize).clamp(1, candidates.len());
    let mut chosen: Vec<usize> = rand::seq::index::sample(rng, candidates.len(), count)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    chosen.sort_unstable();
    let mut masked = ids.clone();
    let mut targets = Vec::with_capacity(count);
    for pos in chosen {
        targets.push((pos, ids.ids[pos]));
        let r: f64 = rng.random();
        if r < 0.8 {
            masked.ids[pos] = MASK;
        } else if r < 0.9 {
            masked.ids[pos] = rng.random_range(FIRST_BYTE..vocab_size as u32);
        }
    }
    Ok((masked, targets))
}

/// Masked-language-model training of the encoder on raw text (labels are
/// ignored). The output projection is tied to the token embeddings with its
/// own bias, which is discarded afterwards. Documents without content tokens
/// are skipped; masks are redrawn every epoch.
pub fn mlm_pretrain(
    w: &EncoderWeights,
    corpus: &LabeledDataset,
    vocab: &SubwordVocabulary,
    hyper: &TrainHyper,
    mask_rate: f64,
) -> Result<MlmRun> {
    hyper.validate()?;
    check_vocab(w, vocab)?;
    let seqs: Vec<TokenIdSequence> = encode_dataset(vocab, corpus, w.config.max_len)
        .into_iter()
        .filter(|s| s.attention_length > 2)
        .collect();
    if seqs.is_empty() {
        return Err(Error::dataset(&corpus.name, "no documents with maskable tokens"));
    }
    let mut w = w.clone();
    w.vocab_fingerprint = Some(vocab.fingerprint().to_string());
    let vocab_size = w.config.vocab_size;
    let mut bias = vec![0.0f32; vocab_size];
    let mut grads = w.zeros_like();
    let mut bias_grads = vec![0.0f32; vocab_size];
    let sizes: Vec<usize> = w.tensors().iter().map(|t| t.len()).chain([vocab_size]).collect();
    let mut adam = hyper.adam::<f32>(sizes);
    let mut order: Vec<usize> = (0..seqs.len()).collect();
    let mut log = Vec::new();

    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut rng_for(hyper.seed, &[SHUFFLE_STREAM, epoch as u64]));
        let mut dropout_rng = rng_for(hyper.seed, &[DROPOUT_STREAM, epoch as u64]);
        let mut mask_rng = rng_for(hyper.seed, &[MASK_STREAM, epoch as u64]);
        let (mut epoch_loss, mut epoch_targets, mut epoch_correct) = (0.0f64, 0usize, 0usize);
        for (batch_index, batch) in order.chunks(hyper.batch_size).enumerate() {
            grads.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|x| *x = 0.0));
            bias_grads.iter_mut().for_each(|x| *x = 0.0);
            let (mut batch_loss, mut batch_targets) = (0.0f64, 0usize);
            for &i in batch {
                let (masked, targets) = mask_with(&seqs[i], mask_rate, vocab_size, &mut mask_rng)?;
                let n = masked.attention_length;
                let dropout = (w.config.dropout > 0.0).then(|| Dropout {
                    p: w.config.dropout,
                    rng: &mut dropout_rng,
                });
                let trace = run_encoder(&w, &masked.ids[..n], n, dropout);
                let (loss, correct, d_hidden) = mlm_loss(&w, &bias, &trace, &targets, &mut grads, &mut bias_grads);
                backward(&w, &trace, &d_hidden, &mut grads);
                batch_loss += loss as f64;
                batch_targets += targets.len();
                epoch_correct += correct;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                });
            }
            epoch_loss += batch_loss;
            epoch_targets += batch_targets;
            let params: Vec<&mut Vec<f32>> = w.tensors_mut().into_iter().chain([&mut bias]).collect();
            let g: Vec<&Vec<f32>> = grads.tensors().into_iter().chain([&bias_grads]).collect();
            adam.update(params, g, 1.0 / batch_targets as f32);
        }
        log.push(EpochLog {
            epoch,
            split: Split::Mlm,
            loss: epoch_loss / epoch_targets as f64,
            accuracy: epoch_correct as f64 / epoch_targets as f64,
        });
    }
    Ok(MlmRun { encoder: w, log })
}
