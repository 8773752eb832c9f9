use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use olid::classical::{train_mnb, train_random_forest, train_svm_sgd, ClassicalModel};
use olid::corpus::{load_tsv, stratified_split, LabelAliases, LabeledDataset};
use olid::encoder::render_log;
use olid::features::{build_vocabulary, vectorize};
use olid::metrics::{render_table, EvalReport, ReportFormat};
use olid::rng::derive_seed;
use olid::strategies::{
    load_checkpoint, run_recipe, save_checkpoint, save_ensemble, RecipeData, RecipeOutput, RecipePlan,
    TransferSource,
};
use olid::textprep::{classical_tokens, preprocess, train_bpe, EmojiTable, SubwordVocabulary};
use serde_json::json;

use crate::artifacts::{
    claim_output_dir, predictions_tsv, write_json, write_manifest, write_text, EncoderModel, LoadedModel, Manifest,
    PreprocessRecord, BOW_VOCAB, BPE_VOCAB, MODEL_FILE, PREPROCESS,
};
use crate::config::{ExperimentConfig, ModelKind};
use crate::exit::ConfigError;

const SPLIT_STREAM: u64 = 1;
const MODEL_STREAM: u64 = 2;
const MEMBER_STREAM: u64 = 3;
const SOURCE_STREAM: u64 = 4;

pub struct TrainArgs {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub force: bool,
}

struct Splits {
    train: LabeledDataset,
    validation: LabeledDataset,
    test: Option<LabeledDataset>,
}

pub fn run(args: &TrainArgs) -> Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(dir) = &args.output_dir {
        config.output_dir = Some(dir.clone());
    }
    config.validate()?;
    let out = config
        .output_dir
        .clone()
        .ok_or_else(|| ConfigError("no output directory: set output_dir or pass --output-dir".into()))?;
    let digest = config.digest();
    claim_output_dir(&out, &digest, args.force)?;

    let splits = load_splits(&config)?;
    let record = PreprocessRecord {
        regime: config.regime(),
        lowercase_ascii: config.preprocess.lowercase_ascii,
    };
    let mut files = Vec::new();
    let mut seeds = BTreeMap::new();
    seeds.insert("root".to_string(), json!(config.seed));
    if config.data.validation.is_none() {
        seeds.insert("split".to_string(), json!(derive_seed(config.seed, &[SPLIT_STREAM])));
    }

    let model = if config.model.kind.is_classical() {
        train_classical(&config, &splits, record, &out, &mut files, &mut seeds)?
    } else {
        train_encoder(&config, &splits, record, &out, &mut files, &mut seeds)?
    };
    write_json(&out.join(PREPROCESS), &record)?;
    files.push(PREPROCESS.to_string());

    let name = display_name(&model);
    let preds = model.predict_all(&splits.validation)?;
    let report = report_for(&splits.validation, &preds)?;
    write_reports(&out, "report", &name, &report, &mut files)?;
    write_text(&out.join("validation.tsv"), &predictions_tsv(&splits.validation, &preds, true))?;
    files.push("validation.tsv".into());
    if let Some(test) = &splits.test {
        let preds = model.predict_all(test)?;
        let report = report_for(test, &preds)?;
        write_reports(&out, "test_report", &name, &report, &mut files)?;
        write_text(&out.join("test.tsv"), &predictions_tsv(test, &preds, true))?;
        files.push("test.tsv".into());
    }
    print!("{}", render_report_text(&name, &report));

    files.sort();
    write_manifest(
        &out,
        &Manifest {
            version: 1,
            command: "train".into(),
            config_sha256: digest,
            seeds,
            files,
        },
    )
}

pub fn report_for(ds: &LabeledDataset, preds: &[crate::artifacts::Prediction]) -> Result<EvalReport> {
    let golds = ds.labels()?;
    let labels: Vec<_> = preds.iter().map(|p| p.label).collect();
    Ok(EvalReport::evaluate(&golds, &labels)?)
}

pub fn render_report_text(name: &str, report: &EvalReport) -> String {
    let mut text = render_table(&[(name, report)]);
    if report.zero_division {
        text.push_str("note: zero denominators were reported as 0\n");
    }
    text
}

pub fn write_reports(dir: &Path, stem: &str, name: &str, report: &EvalReport, files: &mut Vec<String>) -> Result<()> {
    let json_name = format!("{stem}.json");
    let text_name = format!("{stem}.txt");
    write_text(&dir.join(&json_name), &olid::metrics::render_report(report, ReportFormat::Json))?;
    write_text(&dir.join(&text_name), &render_report_text(name, report))?;
    files.push(json_name);
    files.push(text_name);
    Ok(())
}

pub fn display_name(model: &LoadedModel) -> String {
    match model {
        LoadedModel::Classical { model, .. } => match model.kind() {
            "mnb" => "Multinomial Naive Bayes".into(),
            "svm" => "SVM".into(),
            _ => "Random Forest".into(),
        },
        LoadedModel::Encoder {
            model: EncoderModel::Single(c),
            ..
        } => tagged("Encoder", &c.provenance.tags),
        LoadedModel::Encoder {
            model: EncoderModel::Ensemble(e),
            ..
        } => format!("{} {}", tagged("Encoder", &e.members[0].provenance.tags), e.aggregation),
    }
}

fn tagged(base: &str, tags: &[olid::strategies::StrategyTag]) -> String {
    if tags.is_empty() {
        base.to_string()
    } else {
        let t: Vec<String> = tags.iter().map(ToString::to_string).collect();
        format!("{base}({})", t.join("+"))
    }
}

fn load_labeled(config: &ExperimentConfig, path: &Path) -> Result<LabeledDataset> {
    let ds = load_tsv(path, &config.data.columns.schema(), &LabelAliases::default())
        .with_context(|| format!("loading {}", path.display()))?;
    if ds.is_empty() {
        return Err(olid::Error::Dataset {
            name: ds.name,
            message: "no documents".into(),
        }
        .into());
    }
    ds.labels()?;
    Ok(ds)
}

fn load_splits(config: &ExperimentConfig) -> Result<Splits> {
    let train = load_labeled(config, &config.data.train)?;
    let (train, validation) = match &config.data.validation {
        Some(path) => (train, load_labeled(config, path)?),
        None => stratified_split(
            &train,
            config.data.validation_fraction,
            derive_seed(config.seed, &[SPLIT_STREAM]),
        )?,
    };
    let test = config.data.test.as_ref().map(|p| load_labeled(config, p)).transpose()?;
    Ok(Splits { train, validation, test })
}

fn train_classical(
    config: &ExperimentConfig,
    splits: &Splits,
    record: PreprocessRecord,
    out: &Path,
    files: &mut Vec<String>,
    seeds: &mut BTreeMap<String, serde_json::Value>,
) -> Result<LoadedModel> {
    let table = EmojiTable::bundled();
    let tokens: Vec<_> = splits
        .train
        .texts()
        .map(|t| classical_tokens(t, table, record.options()))
        .collect();
    let vocab = build_vocabulary(&tokens, config.model.min_frequency)?;
    let x: Vec<_> = tokens.iter().map(|t| vectorize(&vocab, t)).collect();
    let y = splits.train.labels()?;
    let seed = derive_seed(config.seed, &[MODEL_STREAM]);
    let model = match config.model.kind {
        ModelKind::Mnb => ClassicalModel::Mnb(train_mnb(&x, &y, config.model.smoothing)?),
        ModelKind::Svm => {
            seeds.insert("model".into(), json!(seed));
            ClassicalModel::Svm(train_svm_sgd(&x, &y, config.model.svm.hyper(seed))?)
        }
        ModelKind::Rf => {
            seeds.insert("model".into(), json!(seed));
            ClassicalModel::Rf(train_random_forest(&x, &y, config.model.forest.params(seed))?)
        }
        ModelKind::Encoder => unreachable!("encoder handled separately"),
    };
    model.to_container(&vocab.fingerprint()).save(out.join(MODEL_FILE))?;
    vocab.save(out.join(BOW_VOCAB))?;
    files.extend([MODEL_FILE.to_string(), BOW_VOCAB.to_string()]);

    let loaded = LoadedModel::Classical {
        model,
        vocab,
        preprocess: record,
    };
    let accuracy = |ds: &LabeledDataset| -> Result<f64> {
        let preds = loaded.predict_all(ds)?;
        let golds = ds.labels()?;
        let hits = preds.iter().zip(&golds).filter(|(p, g)| p.label == **g).count();
        Ok(hits as f64 / golds.len() as f64)
    };
    let log = format!(
        "split\taccuracy\ntrain\t{}\nvalidation\t{}\n",
        accuracy(&splits.train)?,
        accuracy(&splits.validation)?
    );
    write_text(&out.join("train_log.tsv"), &log)?;
    files.push("train_log.tsv".into());
    Ok(loaded)
}

fn transformer_view(ds: &LabeledDataset, record: PreprocessRecord) -> LabeledDataset {
    let table = EmojiTable::bundled();
    ds.map_text(|t| preprocess(t, record.regime, table, record.options()))
}

fn train_encoder(
    config: &ExperimentConfig,
    splits: &Splits,
    record: PreprocessRecord,
    out: &Path,
    files: &mut Vec<String>,
    seeds: &mut BTreeMap<String, serde_json::Value>,
) -> Result<LoadedModel> {
    let s = &config.strategy;
    let train = transformer_view(&splits.train, record);
    let validation = transformer_view(&splits.validation, record);
    let source = config
        .data
        .source
        .as_ref()
        .map(|p| load_labeled(config, p).map(|ds| transformer_view(&ds, record)))
        .transpose()?;
    let source_ckpt = config.data.source_checkpoint.as_ref().map(load_checkpoint).transpose()?;

    let vocab = match &config.data.vocab {
        Some(path) => SubwordVocabulary::load(path)?,
        None => {
            // Shared tokenizer over both languages, trained before any model.
            let texts: Vec<&str> = train.texts().chain(source.iter().flat_map(|d| d.texts())).collect();
            train_bpe(&texts, config.model.bpe_merges)?
        }
    };
    vocab.save(out.join(BPE_VOCAB))?;
    files.push(BPE_VOCAB.into());

    let n = config.member_count();
    let member_seeds: Vec<u64> = match &s.seeds {
        Some(seeds) => seeds.clone(),
        None => (0..n as u64).map(|k| derive_seed(config.seed, &[MEMBER_STREAM, k])).collect(),
    };
    let source_seed = derive_seed(config.seed, &[SOURCE_STREAM]);
    seeds.insert("members".into(), json!(member_seeds));
    if let Some(splits) = &s.split_seeds {
        seeds.insert("member_splits".into(), json!(splits));
    }
    let plan = RecipePlan {
        recipe: s.recipe,
        config: config.model.encoder.clone().with_vocab(vocab.len()),
        finetune: config.model.training.hyper(0),
        source_training: s.source_training.hyper(source_seed),
        mlm: s.mlm.hyper(0),
        mask_rate: s.mask_rate,
        mlm_include_source: s.mlm_include_source,
        seeds: member_seeds,
        split_seeds: s.split_seeds.clone(),
        validation_fraction: config.data.validation_fraction,
    };
    let transfer = if s.recipe.transfer {
        match (&source_ckpt, &source) {
            (Some(c), _) => Some(TransferSource::Checkpoint(c)),
            (None, Some(ds)) => {
                seeds.insert("source".into(), json!(source_seed));
                Some(TransferSource::Dataset(ds))
            }
            (None, None) => None,
        }
    } else if s.mlm_include_source {
        source.as_ref().map(TransferSource::Dataset)
    } else {
        None
    };
    // Per-member splits draw validation data from the training file itself.
    let member_validation = s.split_seeds.is_none().then_some(&validation);
    let run = run_recipe(
        &plan,
        RecipeData {
            train: &train,
            validation: member_validation,
            source: transfer,
            vocab: &vocab,
        },
    )?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(src) = &run.source_model {
        save_checkpoint(src, out.join("source.ckpt"))?;
        files.push("source.ckpt".into());
    }
    let model = match run.output {
        RecipeOutput::Single(c) => {
            save_checkpoint(&c, out.join(MODEL_FILE))?;
            write_text(&out.join("train_log.tsv"), &render_log(&c.log))?;
            files.push(MODEL_FILE.into());
            EncoderModel::Single(c)
        }
        RecipeOutput::Ensemble(e) => {
            save_ensemble(&e, out)?;
            files.push(olid::strategies::ENSEMBLE_FILE.into());
            let mut log = String::from("member\tepoch\tsplit\tloss\taccuracy\n");
            for (k, m) in e.members.iter().enumerate() {
                files.push(format!("member_{k}.ckpt"));
                for line in render_log(&m.log).lines().skip(1) {
                    log.push_str(&format!("{k}\t{line}\n"));
                }
            }
            write_text(&out.join("train_log.tsv"), &log)?;
            EncoderModel::Ensemble(e)
        }
    };
    files.push("train_log.tsv".into());
    Ok(LoadedModel::Encoder {
        model,
        vocab,
        preprocess: record,
    })
}
