use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{Container, Tensor};
use crate::distribution::ProbabilityDistribution;
use crate::encoder::{predict_proba, ClassifierHead, EncoderConfig, EncoderWeights, EpochLog};
use crate::error::{Error, Result};
use crate::textprep::bpe::encode;
use crate::textprep::{SubwordVocabulary, TokenIdSequence};

pub const ENCODER_KIND: &str = "encoder";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyTag {
    #[serde(rename = "TL")]
    Transfer,
    #[serde(rename = "LM")]
    LanguageModel,
}

impl fmt::Display for StrategyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyTag::Transfer => "TL",
            StrategyTag::LanguageModel => "LM",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    /// Dataset or task the weights were first trained on.
    pub source_task: String,
    pub seed: u64,
    pub tags: Vec<StrategyTag>,
}

/// Encoder, classifier head, the tokenizer fingerprint they were trained
/// with, provenance and the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub encoder: EncoderWeights,
    pub head: ClassifierHead,
    pub vocab_fingerprint: String,
    pub provenance: Provenance,
    pub log: Vec<EpochLog>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    config: EncoderConfig,
    vocab_fingerprint: String,
    provenance: Provenance,
    log: Vec<EpochLog>,
}

impl Checkpoint {
    pub fn new(
        mut encoder: EncoderWeights,
        head: ClassifierHead,
        vocab_fingerprint: impl Into<String>,
        provenance: Provenance,
        log: Vec<EpochLog>,
    ) -> Result<Self> {
        let vocab_fingerprint = vocab_fingerprint.into();
        match &encoder.vocab_fingerprint {
            Some(fp) if *fp != vocab_fingerprint => {
                return Err(Error::FingerprintMismatch {
                    expected: fp.clone(),
                    found: vocab_fingerprint,
                })
            }
            _ => encoder.vocab_fingerprint = Some(vocab_fingerprint.clone()),
        }
        if head.d_model() != encoder.config.d_model {
            return Err(Error::DimensionMismatch {
                expected: encoder.config.d_model,
                found: head.d_model(),
            });
        }
        Ok(Checkpoint {
            encoder,
            head,
            vocab_fingerprint,
            provenance,
            log,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.encoder.config
    }

    pub fn predict_proba(&self, ids: &TokenIdSequence) -> Result<ProbabilityDistribution> {
        predict_proba(&self.encoder, &self.head, ids)
    }

    /// Tokenize with `vocab` (which must be the training tokenizer) and
    /// classify.
    pub fn predict_text(&self, vocab: &SubwordVocabulary, text: &str) -> Result<ProbabilityDistribution> {
        self.check_vocab(vocab)?;
        self.predict_proba(&encode(vocab, text, self.config().max_len))
    }

    pub fn check_vocab(&self, vocab: &SubwordVocabulary) -> Result<()> {
        if vocab.fingerprint() != self.vocab_fingerprint {
            return Err(Error::FingerprintMismatch {
                expected: self.vocab_fingerprint.clone(),
                found: vocab.fingerprint().to_string(),
            });
        }
        Ok(())
    }

    pub fn to_container(&self) -> Container {
        let meta = Meta {
            config: self.encoder.config.clone(),
            vocab_fingerprint: self.vocab_fingerprint.clone(),
            provenance: self.provenance.clone(),
            log: self.log.clone(),
        };
        let mut c = Container::new(ENCODER_KIND, serde_json::to_value(meta).expect("metadata serializes"));
        for (name, shape, data) in self.encoder.named_tensors().into_iter().chain(self.head.named_tensors()) {
            c.push(Tensor::f32(name, shape, data));
        }
        c
    }

    pub fn from_container(c: &Container) -> Result<Self> {
        c.expect_kind(ENCODER_KIND)?;
        let meta: Meta = c.metadata_as()?;
        meta.config.validate()?;
        let shapes = EncoderWeights::<f32>::shapes(&meta.config);
        let mut tensors = Vec::with_capacity(shapes.len());
        for (name, shape) in &shapes {
            let t = c.tensor(name)?;
            if t.shape != *shape {
                return Err(Error::Checkpoint(format!("tensor {name} has shape {:?}, expected {shape:?}", t.shape)));
            }
            tensors.push(c.f32s(name)?.to_vec());
        }
        let encoder = EncoderWeights::from_tensors(&meta.config, tensors)?;
        let weight = c.f32s("head.weight")?;
        let bias = c.f32s("head.bias")?;
        if weight.len() != 2 * meta.config.d_model || bias.len() != 2 {
            return Err(Error::Checkpoint("classifier head has the wrong shape".into()));
        }
        let head = ClassifierHead {
            weight: weight.to_vec(),
            bias: bias.to_vec(),
        };
        Checkpoint::new(encoder, head, meta.vocab_fingerprint, meta.provenance, meta.log)
    }
}

pub fn save_checkpoint(c: &Checkpoint, path: impl AsRef<Path>) -> Result<()> {
    c.to_container().save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    Checkpoint::from_container(&Container::load(path)?)
}

/// Copy encoder and head weights from `source` for fine-tuning on a target
/// language. The tokenizer must be shared: mismatched fingerprints are an
/// error, never silently re-embedded.
pub fn transfer_init(source: &Checkpoint, target_vocab_fingerprint: &str) -> Result<(EncoderWeights, ClassifierHead)> {
    if source.vocab_fingerprint != target_vocab_fingerprint {
        return Err(Error::FingerprintMismatch {
            expected: source.vocab_fingerprint.clone(),
            found: target_vocab_fingerprint.to_string(),
        });
    }
    if source.head.bias.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: source.head.bias.len(),
        });
    }
    Ok((source.encoder.clone(), source.head.clone()))
}
