use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{stratified_split, LabeledDataset};
use crate::encoder::{init_encoder, init_head, mlm_pretrain, train_classifier, EncoderConfig, TrainHyper};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::textprep::SubwordVocabulary;

use super::checkpoint::{transfer_init, Checkpoint, Provenance, StrategyTag};
use super::ensemble::{train_ensemble, Aggregation, EnsembleModel};

/// A validated strategy composition such as `base` or `TL+ASE+LM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Recipe {
    pub transfer: bool,
    pub language_model: bool,
    pub aggregation: Option<Aggregation>,
}

impl Recipe {
    pub fn tags(&self) -> Vec<StrategyTag> {
        let mut tags = Vec::new();
        if self.transfer {
            tags.push(StrategyTag::Transfer);
        }
        if self.language_model {
            tags.push(StrategyTag::LanguageModel);
        }
        tags
    }

    /// Without an aggregation rule the recipe yields one checkpoint, so
    /// exactly one member is allowed.
    pub fn check_members(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidRecipe("at least one seed is required".into()));
        }
        if self.aggregation.is_none() && n != 1 {
            return Err(Error::InvalidRecipe(format!(
                "{n} seeds given but recipe {self} has no MSE or ASE aggregation"
            )));
        }
        Ok(())
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut recipe = Recipe::default();
        let mut seen_base = false;
        let parts: Vec<&str> = s.split('+').map(str::trim).collect();
        for part in &parts {
            let dup = || Error::InvalidRecipe(format!("{part} appears twice in {s:?}"));
            match part.to_ascii_uppercase().as_str() {
                "BASE" => {
                    if seen_base {
                        return Err(dup());
                    }
                    seen_base = true;
                }
                "TL" => {
                    if recipe.transfer {
                        return Err(dup());
                    }
                    recipe.transfer = true;
                }
                "LM" => {
                    if recipe.language_model {
                        return Err(dup());
                    }
                    recipe.language_model = true;
                }
                "MSE" | "ASE" => {
                    let agg: Aggregation = part.parse()?;
                    match recipe.aggregation {
                        Some(prev) if prev == agg => return Err(dup()),
                        Some(_) => {
                            return Err(Error::InvalidRecipe(
                                "MSE and ASE are alternative aggregations and cannot be combined".into(),
                            ))
                        }
                        None => recipe.aggregation = Some(agg),
                    }
                }
                "" => return Err(Error::InvalidRecipe(format!("empty component in {s:?}"))),
                other => {
                    return Err(Error::InvalidRecipe(format!(
                        "unknown component {other:?}; expected base, TL, MSE, ASE or LM"
                    )))
                }
            }
        }
        if seen_base && parts.len() > 1 {
            return Err(Error::InvalidRecipe("base cannot be combined with other strategies".into()));
        }
        Ok(recipe)
    }
}

impl fmt::Display for Recipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.transfer {
            parts.push("TL".into());
        }
        if let Some(a) = self.aggregation {
            parts.push(a.to_string());
        }
        if self.language_model {
            parts.push("LM".into());
        }
        if parts.is_empty() {
            f.write_str("base")
        } else {
            f.write_str(&parts.join("+"))
        }
    }
}

impl Serialize for Recipe {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Recipe {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where transfer-learning weights come from.
#[derive(Debug, Clone, Copy)]
pub enum TransferSource<'a> {
    /// A previously saved source-language model.
    Checkpoint(&'a Checkpoint),
    /// A labeled source-language corpus; a source model is trained first.
    Dataset(&'a LabeledDataset),
}

#[derive(Debug, Clone, Copy)]
pub struct RecipeData<'a> {
    pub train: &'a LabeledDataset,
    pub validation: Option<&'a LabeledDataset>,
    pub source: Option<TransferSource<'a>>,
    pub vocab: &'a SubwordVocabulary,
}

/// Everything besides the data that a recipe run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RecipePlan {
    pub recipe: Recipe,
    pub config: EncoderConfig,
    /// Classifier fine-tuning on the target task. The seed is ignored in
    /// favour of the member seeds.
    pub finetune: TrainHyper,
    /// Training of the source model when TL starts from a dataset.
    pub source_training: TrainHyper,
    pub mlm: TrainHyper,
    pub mask_rate: f64,
    /// Also run MLM over the source-language text.
    pub mlm_include_source: bool,
    /// One seed per member.
    pub seeds: Vec<u64>,
    /// Optional per-member split seeds: member `k` then trains on its own
    /// stratified split of the training data.
    pub split_seeds: Option<Vec<u64>>,
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RecipeOutput {
    Single(Checkpoint),
    Ensemble(EnsembleModel),
}

#[derive(Debug, Clone)]
pub struct RecipeRun {
    pub output: RecipeOutput,
    /// Source model trained for TL, if one was trained here.
    pub source_model: Option<Checkpoint>,
    pub warnings: Vec<String>,
}

impl RecipeOutput {
    pub fn members(&self) -> &[Checkpoint] {
        match self {
            RecipeOutput::Single(c) => std::slice::from_ref(c),
            RecipeOutput::Ensemble(e) => &e.members,
        }
    }
}

/// Train a plain classifier from random initialization and wrap it as a
/// checkpoint. Used for source models and as the `base` recipe.
pub fn train_from_scratch(
    config: &EncoderConfig,
    train: &LabeledDataset,
    validation: Option<&LabeledDataset>,
    vocab: &SubwordVocabulary,
    hyper: &TrainHyper,
) -> Result<Checkpoint> {
    let w = init_encoder(config, hyper.seed)?;
    let head = init_head(config, hyper.seed);
    let trained = train_classifier(&w, &head, train, validation, vocab, hyper)?;
    Checkpoint::new(
        trained.encoder,
        trained.head,
        vocab.fingerprint(),
        Provenance {
            source_task: train.name.clone(),
            seed: hyper.seed,
            tags: Vec::new(),
        },
        trained.log,
    )
}

fn concat(name: &str, parts: &[&LabeledDataset]) -> Result<LabeledDataset> {
    let docs = parts.iter().flat_map(|d| d.documents.iter().cloned()).collect();
    LabeledDataset::new(name, docs)
}

/// Run the stages in order: optional TL initialization, optional MLM on task
/// text, classifier fine-tuning, optional ensemble wrap. Every member is
/// tagged with the strategies applied to it.
pub fn run_recipe(plan: &RecipePlan, data: RecipeData<'_>) -> Result<RecipeRun> {
    let recipe = plan.recipe;
    recipe.check_members(plan.seeds.len())?;
    plan.config.validate()?;
    plan.finetune.validate()?;
    if plan.config.vocab_size != data.vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: plan.config.vocab_size,
            found: data.vocab.len(),
        });
    }
    if let Some(splits) = &plan.split_seeds {
        if splits.len() != plan.seeds.len() {
            return Err(Error::InvalidRecipe(format!(
                "{} split seeds for {} members",
                splits.len(),
                plan.seeds.len()
            )));
        }
    }
    if recipe.transfer && data.source.is_none() {
        return Err(Error::InvalidRecipe("TL needs a source checkpoint or source dataset".into()));
    }
    if plan.mlm_include_source && !matches!(data.source, Some(TransferSource::Dataset(_))) {
        return Err(Error::InvalidRecipe("MLM over source text needs a source dataset".into()));
    }
    let fingerprint = data.vocab.fingerprint();

    let mut source_model = None;
    let source_ckpt: Option<Checkpoint> = match (recipe.transfer, data.source) {
        (true, Some(TransferSource::Checkpoint(c))) => {
            if c.config() != &plan.config {
                return Err(Error::InvalidRecipe("source checkpoint has a different encoder configuration".into()));
            }
            Some(c.clone())
        }
        (true, Some(TransferSource::Dataset(ds))) => {
            let c = train_from_scratch(&plan.config, ds, None, data.vocab, &plan.source_training)?;
            source_model = Some(c.clone());
            Some(c)
        }
        _ => None,
    };
    let source_task = match &source_ckpt {
        Some(c) => c.provenance.source_task.clone(),
        None => data.train.name.clone(),
    };

    let mlm_corpus = if recipe.language_model {
        plan.mlm.validate()?;
        Some(match (plan.mlm_include_source, data.source) {
            (true, Some(TransferSource::Dataset(src))) => {
                concat(&format!("{}+{}", data.train.name, src.name), &[data.train, src])?
            }
            _ => data.train.clone(),
        })
    } else {
        None
    };

    let train_member = |k: usize, seed: u64| -> Result<Checkpoint> {
        let (mut w, head) = match &source_ckpt {
            Some(src) => transfer_init(src, fingerprint)?,
            None => (init_encoder(&plan.config, seed)?, init_head(&plan.config, seed)),
        };
        let mut log = Vec::new();
        if let Some(corpus) = &mlm_corpus {
            let hyper = TrainHyper {
                seed: derive_seed(seed, &[0x4C4D]),
                ..plan.mlm.clone()
            };
            let run = mlm_pretrain(&w, corpus, data.vocab, &hyper, plan.mask_rate)?;
            w = run.encoder;
            log.extend(run.log);
        }
        let split;
        let (train, validation) = match &plan.split_seeds {
            Some(splits) => {
                split = stratified_split(data.train, plan.validation_fraction, splits[k])?;
                (&split.0, Some(&split.1))
            }
            None => (data.train, data.validation),
        };
        let hyper = TrainHyper {
            seed,
            ..plan.finetune.clone()
        };
        let trained = train_classifier(&w, &head, train, validation, data.vocab, &hyper)?;
        log.extend(trained.log);
        Checkpoint::new(
            trained.encoder,
            trained.head,
            fingerprint,
            Provenance {
                source_task: source_task.clone(),
                seed,
                tags: recipe.tags(),
            },
            log,
        )
    };

    let (mut members, warnings) = train_ensemble(&plan.seeds, train_member)?;
    let output = match recipe.aggregation {
        Some(aggregation) => RecipeOutput::Ensemble(EnsembleModel::new(members, aggregation)?),
        None => RecipeOutput::Single(members.remove(0)),
    };
    Ok(RecipeRun {
        output,
        source_model,
        warnings,
    })
}
