//! Output directories, manifests and loading of saved models.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use olid::classical::ClassicalModel;
use olid::container::Container;
use olid::corpus::{BinaryLabel, LabeledDataset};
use olid::features::{vectorize, BowVocabulary};
use olid::strategies::{load_ensemble, Checkpoint, EnsembleModel, ENCODER_KIND, ENSEMBLE_FILE};
use olid::textprep::{classical_tokens, encode, ClassicalOptions, EmojiTable, Regime, SubwordVocabulary};
use olid::ProbabilityDistribution;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::exit::ConfigError;

pub const MANIFEST: &str = "manifest.json";
pub const PREPROCESS: &str = "preprocess.json";
pub const MODEL_FILE: &str = "model.ckpt";
pub const BPE_VOCAB: &str = "vocab.bpe";
pub const BOW_VOCAB: &str = "vocab.bow";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub command: String,
    pub config_sha256: String,
    pub seeds: BTreeMap<String, serde_json::Value>,
    pub files: Vec<String>,
}

/// Claim `dir` for a run whose configuration hashes to `digest`. A directory
/// holding another configuration's artifacts is only reused with `force`.
pub fn claim_output_dir(dir: &Path, digest: &str, force: bool) -> Result<()> {
    let manifest = dir.join(MANIFEST);
    if manifest.exists() {
        let text = fs::read_to_string(&manifest).with_context(|| format!("reading {}", manifest.display()))?;
        let previous: Manifest =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest.display()))?;
        if previous.config_sha256 != digest && !force {
            bail!(ConfigError(format!(
                "{} holds results of a different configuration; use --force to overwrite",
                dir.display()
            )));
        }
    } else if dir.exists() && fs::read_dir(dir)?.next().is_some() && !force {
        bail!(ConfigError(format!(
            "{} is not empty and has no manifest; use --force to write into it",
            dir.display()
        )));
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    write_json(&dir.join(MANIFEST), manifest)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// How inputs were preprocessed at training time; stored next to the model
/// so evaluation and prediction repeat it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessRecord {
    pub regime: Regime,
    pub lowercase_ascii: bool,
}

impl PreprocessRecord {
    pub fn options(&self) -> ClassicalOptions {
        ClassicalOptions {
            lowercase_ascii: self.lowercase_ascii,
        }
    }
}

pub enum LoadedModel {
    Classical {
        model: ClassicalModel,
        vocab: BowVocabulary,
        preprocess: PreprocessRecord,
    },
    Encoder {
        model: EncoderModel,
        vocab: SubwordVocabulary,
        preprocess: PreprocessRecord,
    },
}

pub enum EncoderModel {
    Single(Checkpoint),
    Ensemble(EnsembleModel),
}

impl EncoderModel {
    fn fingerprint(&self) -> &str {
        match self {
            EncoderModel::Single(c) => &c.vocab_fingerprint,
            EncoderModel::Ensemble(e) => e.vocab_fingerprint(),
        }
    }

    fn max_len(&self) -> usize {
        match self {
            EncoderModel::Single(c) => c.config().max_len,
            EncoderModel::Ensemble(e) => e.max_len(),
        }
    }
}

pub struct Prediction {
    pub label: BinaryLabel,
    pub probs: Option<ProbabilityDistribution>,
}

impl LoadedModel {
    /// Load a model file, an ensemble directory (with `ensemble.json`) or a
    /// training output directory (with `model.ckpt`). The tokenizer and
    /// preprocessing record are looked up next to the model unless given.
    pub fn load(path: &Path, vocab: Option<&Path>) -> Result<Self> {
        let (file, dir): (Option<PathBuf>, PathBuf) = if path.is_dir() {
            if path.join(ENSEMBLE_FILE).exists() {
                (None, path.to_path_buf())
            } else {
                (Some(path.join(MODEL_FILE)), path.to_path_buf())
            }
        } else {
            (Some(path.to_path_buf()), path.parent().unwrap_or(Path::new(".")).to_path_buf())
        };
        let record = read_preprocess(&dir)?;
        match file {
            None => {
                let ensemble = load_ensemble(&dir)?;
                Self::encoder(EncoderModel::Ensemble(ensemble), &dir, vocab, record)
            }
            Some(file) => {
                let container = Container::load(&file)?;
                if container.kind == ENCODER_KIND {
                    let c = Checkpoint::from_container(&container)?;
                    Self::encoder(EncoderModel::Single(c), &dir, vocab, record)
                } else {
                    let (model, fingerprint) = ClassicalModel::from_container(&container)?;
                    let vocab_path = vocab.map(Path::to_path_buf).unwrap_or_else(|| dir.join(BOW_VOCAB));
                    let bow = BowVocabulary::load(&vocab_path)?;
                    if bow.fingerprint() != fingerprint {
                        return Err(olid::Error::FingerprintMismatch {
                            expected: fingerprint,
                            found: bow.fingerprint(),
                        }
                        .into());
                    }
                    Ok(LoadedModel::Classical {
                        model,
                        vocab: bow,
                        preprocess: record.unwrap_or(PreprocessRecord {
                            regime: Regime::Classical,
                            lowercase_ascii: true,
                        }),
                    })
                }
            }
        }
    }

    fn encoder(model: EncoderModel, dir: &Path, vocab: Option<&Path>, record: Option<PreprocessRecord>) -> Result<Self> {
        let vocab_path = vocab.map(Path::to_path_buf).unwrap_or_else(|| dir.join(BPE_VOCAB));
        let vocab = SubwordVocabulary::load(&vocab_path)?;
        if vocab.fingerprint() != model.fingerprint() {
            return Err(olid::Error::FingerprintMismatch {
                expected: model.fingerprint().to_string(),
                found: vocab.fingerprint().to_string(),
            }
            .into());
        }
        Ok(LoadedModel::Encoder {
            model,
            vocab,
            preprocess: record.unwrap_or(PreprocessRecord {
                regime: Regime::Transformer,
                lowercase_ascii: true,
            }),
        })
    }

    pub fn predict(&self, text: &str) -> Result<Prediction> {
        let table = EmojiTable::bundled();
        Ok(match self {
            LoadedModel::Classical {
                model,
                vocab,
                preprocess,
            } => {
                let x = vectorize(vocab, &classical_tokens(text, table, preprocess.options()));
                let (label, probs) = model.predict(&x)?;
                Prediction { label, probs }
            }
            LoadedModel::Encoder {
                model,
                vocab,
                preprocess,
            } => {
                let text = olid::textprep::preprocess(text, preprocess.regime, table, preprocess.options());
                let ids = encode(vocab, &text, model.max_len());
                match model {
                    EncoderModel::Single(c) => {
                        let p = c.predict_proba(&ids)?;
                        Prediction {
                            label: p.argmax(),
                            probs: Some(p),
                        }
                    }
                    EncoderModel::Ensemble(e) => {
                        let (label, probs) = e.predict(&ids)?;
                        Prediction { label, probs }
                    }
                }
            }
        })
    }

    pub fn predict_all(&self, ds: &LabeledDataset) -> Result<Vec<Prediction>> {
        ds.texts().map(|t| self.predict(t)).collect()
    }
}

fn read_preprocess(dir: &Path) -> Result<Option<PreprocessRecord>> {
    let path = dir.join(PREPROCESS);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?))
}

/// `id, gold, predicted[, p_NOT, p_OFF]` rows.
pub fn predictions_tsv(ds: &LabeledDataset, preds: &[Prediction], with_gold: bool) -> String {
    let with_probs = preds.iter().all(|p| p.probs.is_some());
    let mut out = String::from("id");
    if with_gold {
        out.push_str("\tgold");
    }
    out.push_str("\tlabel");
    if with_probs {
        out.push_str("\tp_NOT\tp_OFF");
    }
    out.push('\n');
    for (doc, p) in ds.documents.iter().zip(preds) {
        out.push_str(&doc.id);
        if with_gold {
            out.push('\t');
            out.push_str(doc.label.map_or("", BinaryLabel::as_str));
        }
        out.push('\t');
        out.push_str(p.label.as_str());
        if let (true, Some(d)) = (with_probs, p.probs) {
            out.push_str(&format!("\t{:.6}\t{:.6}", d.probs()[0], d.probs()[1]));
        }
        out.push('\n');
    }
    out
}
