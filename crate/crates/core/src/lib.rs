//! Offensive language identification for code-mixed social media text.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: TSV ingestion, label mapping, stratified splits and a
//!   synthetic two-language benchmark generator.
//! - [`textprep`]: emoji handling, punctuation removal, a rule-based English
//!   lemmatizer and a byte-level BPE tokenizer.
//! - [`features`]: bag-of-words vocabularies and sparse count vectors.
//! - [`classical`]: multinomial naive Bayes, an SGD linear SVM and a random
//!   forest over bag-of-words counts.
//! - [`encoder`]: a small transformer encoder with a `[CLS]` softmax head,
//!   masked-language-model pretraining and a finite-difference gradient check.
//! - [`strategies`]: checkpoints, cross-lingual transfer, self-ensembles and
//!   composed training recipes.
//! - [`metrics`]: confusion matrices and per-class / weighted / macro scores.

pub mod classical;
pub mod container;
pub mod corpus;
mod distribution;
pub mod encoder;
pub mod error;
pub mod features;
pub mod metrics;
pub mod rng;
pub mod strategies;
pub mod textprep;

pub use corpus::{BinaryLabel, CorpusStats, Document, LabeledDataset};
pub use distribution::ProbabilityDistribution;

pub use encoder::{ClassifierHead, EncoderConfig, EncoderWeights, TrainHyper};
pub use error::{Error, Result};
pub use metrics::{ConfusionMatrix, EvalReport};
pub use strategies::{Checkpoint, EnsembleModel};
pub use textprep::{SubwordVocabulary, TokenIdSequence, TokenSequence};
