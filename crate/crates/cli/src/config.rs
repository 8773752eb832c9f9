//! Experiment configuration. Every table rejects unknown keys so that a
//! misspelled hyperparameter fails loudly instead of silently defaulting.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use olid::classical::{ForestParams, MaxFeatures, SvmHyper};
use olid::corpus::{SynthConfig, TsvSchema};
use olid::encoder::{EncoderConfig, TrainHyper};
use olid::strategies::Recipe;
use olid::textprep::{ClassicalOptions, Regime};
use serde::{Deserialize, Serialize};

use crate::exit::ConfigError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; split, model and member seeds derive from it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    pub model: ModelConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub train: PathBuf,
    /// When absent, a stratified split of `train` is used.
    #[serde(default)]
    pub validation: Option<PathBuf>,
    #[serde(default)]
    pub test: Option<PathBuf>,
    /// Labeled source-language corpus for transfer learning.
    #[serde(default)]
    pub source: Option<PathBuf>,
    /// Saved source model for transfer learning; needs `vocab`.
    #[serde(default)]
    pub source_checkpoint: Option<PathBuf>,
    /// Existing BPE vocabulary to use instead of training one.
    #[serde(default)]
    pub vocab: Option<PathBuf>,
    #[serde(default = "default_fraction")]
    pub validation_fraction: f64,
    #[serde(default)]
    pub columns: Columns,
}

fn default_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Columns {
    pub id: String,
    pub text: String,
    pub label: String,
}

impl Default for Columns {
    fn default() -> Self {
        Columns {
            id: "id".into(),
            text: "text".into(),
            label: "label".into(),
        }
    }
}

impl Columns {
    pub fn schema(&self) -> TsvSchema {
        TsvSchema {
            header: true,
            id: self.id.as_str().into(),
            text: self.text.as_str().into(),
            label: Some(self.label.as_str().into()),
            columns: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Defaults to `classical` for bag-of-words models and `transformer`
    /// for the encoder.
    pub regime: Option<Regime>,
    pub lowercase_ascii: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            regime: None,
            lowercase_ascii: ClassicalOptions::default().lowercase_ascii,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mnb,
    Svm,
    Rf,
    Encoder,
}

impl ModelKind {
    pub fn is_classical(self) -> bool {
        self != ModelKind::Encoder
    }

    pub fn default_regime(self) -> Regime {
        if self.is_classical() {
            Regime::Classical
        } else {
            Regime::Transformer
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    /// Bag-of-words: drop tokens seen fewer times in training.
    #[serde(default = "one")]
    pub min_frequency: usize,
    /// Naive Bayes additive smoothing.
    #[serde(default = "one_f")]
    pub smoothing: f64,
    #[serde(default)]
    pub svm: SvmConfig,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub encoder: EncoderConfig,
    #[serde(default = "default_merges")]
    pub bpe_merges: usize,
    #[serde(default)]
    pub training: TrainingConfig,
}

fn one() -> usize {
    1
}

fn one_f() -> f64 {
    1.0
}

fn default_merges() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmConfig {
    pub alpha: f64,
    pub epochs: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let d = SvmHyper::default();
        SvmConfig {
            alpha: d.alpha,
            epochs: d.epochs,
        }
    }
}

impl SvmConfig {
    pub fn hyper(&self, seed: u64) -> SvmHyper {
        SvmHyper {
            alpha: self.alpha,
            epochs: self.epochs,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestConfig {
    fn default() -> Self {
        let d = ForestParams::default();
        ForestConfig {
            n_trees: d.n_trees,
            bootstrap: d.bootstrap,
            max_features: d.max_features,
        }
    }
}

impl ForestConfig {
    pub fn params(&self, seed: u64) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            bootstrap: self.bootstrap,
            max_features: self.max_features,
            seed,
        }
    }
}

/// Optimizer settings; seeds come from the root seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig::from(&TrainHyper::default())
    }
}

impl From<&TrainHyper> for TrainingConfig {
    fn from(h: &TrainHyper) -> Self {
        TrainingConfig {
            learning_rate: h.learning_rate,
            epochs: h.epochs,
            batch_size: h.batch_size,
            beta1: h.beta1,
            beta2: h.beta2,
            epsilon: h.epsilon,
        }
    }
}

impl TrainingConfig {
    pub fn hyper(&self, seed: u64) -> TrainHyper {
        TrainHyper {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyConfig {
    pub recipe: Recipe,
    /// Ensemble size; defaults to 3 with an aggregation and 1 without.
    pub members: Option<usize>,
    /// Explicit member seeds; derived from the root seed when absent.
    pub seeds: Option<Vec<u64>>,
    /// Per-member train/validation split seeds.
    pub split_seeds: Option<Vec<u64>>,
    pub mask_rate: f64,
    pub mlm_include_source: bool,
    pub mlm: TrainingConfig,
    pub source_training: TrainingConfig,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig {
            recipe: Recipe::default(),
            members: None,
            seeds: None,
            split_seeds: None,
            mask_rate: 0.15,
            mlm_include_source: false,
            mlm: TrainingConfig::default(),
            source_training: TrainingConfig::default(),
        }
    }
}

pub const DEFAULT_ENSEMBLE_SIZE: usize = 3;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Ok(config.resolve_paths(base))
    }

    /// Relative data paths are taken relative to the config file.
    fn resolve_paths(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.train);
        for p in [
            &mut self.data.validation,
            &mut self.data.test,
            &mut self.data.source,
            &mut self.data.source_checkpoint,
            &mut self.data.vocab,
            &mut self.output_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        self
    }

    pub fn regime(&self) -> Regime {
        self.preprocess.regime.unwrap_or(self.model.kind.default_regime())
    }

    pub fn member_count(&self) -> usize {
        let s = &self.strategy;
        match (&s.seeds, s.members) {
            (Some(seeds), _) => seeds.len(),
            (None, Some(n)) => n,
            (None, None) if s.recipe.aggregation.is_some() => DEFAULT_ENSEMBLE_SIZE,
            (None, None) => 1,
        }
    }

    /// Everything checkable before any data is touched.
    pub fn validate(&self) -> Result<()> {
        let s = &self.strategy;
        let recipe = s.recipe;
        if self.model.kind.is_classical() {
            if recipe != Recipe::default() {
                bail!(ConfigError(format!(
                    "strategy recipe {recipe} applies to the encoder only, not to model kind {:?}",
                    self.model.kind
                )));
            }
            if self.regime() != Regime::Classical {
                bail!(ConfigError("bag-of-words models need the classical preprocessing regime".into()));
            }
        }
        if let (Some(seeds), Some(n)) = (&s.seeds, s.members) {
            if seeds.len() != n {
                bail!(ConfigError(format!("{} seeds listed for {n} members", seeds.len())));
            }
        }
        recipe.check_members(self.member_count()).map_err(|e| ConfigError(e.to_string()))?;
        if let Some(splits) = &s.split_seeds {
            if splits.len() != self.member_count() {
                bail!(ConfigError(format!(
                    "{} split seeds for {} members",
                    splits.len(),
                    self.member_count()
                )));
            }
        }
        if recipe.transfer && self.data.source.is_none() && self.data.source_checkpoint.is_none() {
            bail!(ConfigError("TL needs data.source or data.source_checkpoint".into()));
        }
        if self.data.source_checkpoint.is_some() && self.data.vocab.is_none() {
            bail!(ConfigError(
                "data.source_checkpoint needs data.vocab, the tokenizer it was trained with".into()
            ));
        }
        if !(self.data.validation_fraction > 0.0 && self.data.validation_fraction < 1.0) {
            bail!(ConfigError("data.validation_fraction must lie in (0, 1)".into()));
        }
        if !(s.mask_rate > 0.0 && s.mask_rate < 1.0) {
            bail!(ConfigError("strategy.mask_rate must lie in (0, 1)".into()));
        }
        for (name, t) in [
            ("model.training", &self.model.training),
            ("strategy.mlm", &s.mlm),
            ("strategy.source_training", &s.source_training),
        ] {
            t.hyper(0).validate().map_err(|e| ConfigError(format!("{name}: {e}")))?;
        }
        if !self.model.kind.is_classical() {
            self.model
                .encoder
                .clone()
                .with_vocab(256)
                .validate()
                .map_err(|e| ConfigError(format!("model.encoder: {e}")))?;
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration, used to guard output
    /// directories. Where the artifacts go is not part of the experiment.
    pub fn digest(&self) -> String {
        let canonical = ExperimentConfig {
            output_dir: None,
            ..self.clone()
        };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        crate::artifacts::sha256_hex(&json)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthFile {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub synth: SynthConfig,
}

impl SynthFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))
            .map_err(|e| ConfigError(format!("{e:#}")))?;
        let mut file: SynthFile = toml::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        if let Some(dir) = &mut file.output_dir {
            if dir.is_relative() {
                *dir = path.parent().unwrap_or(Path::new("")).join(&*dir);
            }
        }
        Ok(file)
    }
}
