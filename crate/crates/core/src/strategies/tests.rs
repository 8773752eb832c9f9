use proptest::prelude::*;

use super::*;
use crate::container::Container;
use crate::corpus::{BinaryLabel, Document, LabeledDataset};
use crate::distribution::ProbabilityDistribution;
use crate::encoder::{encode_dataset, init_encoder, init_head, EncoderConfig, TrainHyper};
use crate::textprep::{train_bpe, SubwordVocabulary};

fn dist(p_not: f64) -> ProbabilityDistribution {
    ProbabilityDistribution::new([p_not, 1.0 - p_not]).unwrap()
}

fn corpus(name: &str, n: usize) -> LabeledDataset {
    let docs = (0..n)
        .map(|i| {
            let off = i % 3 == 0;
            let text = format!("{} word{} filler {}", if off { "zap" } else { "mol" }, i % 7, i % 4);
            Document::new(format!("{name}{i}"), text, Some(if off { BinaryLabel::Off } else { BinaryLabel::Not }))
        })
        .collect();
    LabeledDataset::new(name, docs).unwrap()
}

fn vocab() -> SubwordVocabulary {
    let c = corpus("v", 30);
    let texts: Vec<&str> = c.texts().collect();
    train_bpe(&texts, 40).unwrap()
}

fn config(v: &SubwordVocabulary) -> EncoderConfig {
    EncoderConfig {
        d_model: 8,
        heads: 2,
        layers: 1,
        ff_dim: 16,
        max_len: 12,
        vocab_size: v.len(),
        dropout: 0.1,
    }
}

fn checkpoint(v: &SubwordVocabulary, seed: u64) -> Checkpoint {
    let c = config(v);
    Checkpoint::new(
        init_encoder(&c, seed).unwrap(),
        init_head(&c, seed),
        v.fingerprint(),
        Provenance {
            source_task: "fixture".into(),
            seed,
            tags: vec![StrategyTag::Transfer],
        },
        Vec::new(),
    )
    .unwrap()
}

fn quick(epochs: usize) -> TrainHyper {
    TrainHyper {
        learning_rate: 1e-3,
        epochs,
        batch_size: 4,
        ..TrainHyper::default()
    }
}

fn plan(recipe: &str, v: &SubwordVocabulary, seeds: Vec<u64>) -> RecipePlan {
    RecipePlan {
        recipe: recipe.parse().unwrap(),
        config: config(v),
        finetune: quick(1),
        source_training: quick(1),
        mlm: quick(1),
        mask_rate: 0.15,
        mlm_include_source: false,
        seeds,
        split_seeds: None,
        validation_fraction: 0.25,
    }
}

#[test]
fn ase_averages_the_worked_example() {
    let p = ase_average(&[dist(0.6), dist(0.2)]).unwrap();
    assert!((p.probs()[0] - 0.4).abs() < 1e-15);
    assert!((p.probs()[1] - 0.6).abs() < 1e-15);
    assert_eq!(p.argmax(), BinaryLabel::Off);
}

#[test]
fn ase_of_identical_members_is_the_member() {
    let d = dist(0.37);
    assert_eq!(ase_average(&[d, d, d]).unwrap(), d);
}

#[test]
fn mse_majority_and_tie_rule() {
    assert_eq!(mse_vote(&[dist(0.1), dist(0.3), dist(0.9)]).unwrap(), BinaryLabel::Off);
    // one vote each; mean OFF probability 0.51
    assert_eq!(mse_vote(&[dist(0.3), dist(0.68)]).unwrap(), BinaryLabel::Off);
    assert_eq!(mse_vote(&[dist(0.45), dist(0.9)]).unwrap(), BinaryLabel::Not);
    // equal vote and equal means: lower index
    assert_eq!(mse_vote(&[dist(0.25), dist(0.75)]).unwrap(), BinaryLabel::Not);
    assert_eq!(mse_vote(&[dist(0.2)]).unwrap(), BinaryLabel::Off);
    assert!(mse_vote(&[]).is_err());
    assert!(ase_average(&[]).is_err());
}

proptest! {
    #[test]
    fn ase_is_the_member_mean(ps in prop::collection::vec(0.0f64..=1.0, 1..12)) {
        let members: Vec<_> = ps.iter().map(|&p| dist(p)).collect();
        let avg = ase_average(&members).unwrap();
        let mean_not = ps.iter().sum::<f64>() / ps.len() as f64;
        prop_assert!((avg.probs()[0] - mean_not).abs() <= 1e-12);
        prop_assert!((avg.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let mut reversed = members.clone();
        reversed.reverse();
        prop_assert_eq!(ase_average(&reversed).unwrap().argmax(), avg.argmax());
    }

    #[test]
    fn odd_ensembles_never_tie(ps in prop::collection::vec(0.0f64..=1.0, 1..6)) {
        let n = 2 * ps.len() - 1;
        let members: Vec<_> = ps.iter().cycle().take(n).map(|&p| dist(p)).collect();
        let off = members.iter().filter(|d| d.argmax() == BinaryLabel::Off).count();
        let expected = if 2 * off > n { BinaryLabel::Off } else { BinaryLabel::Not };
        prop_assert_eq!(mse_vote(&members).unwrap(), expected);
    }
}

#[test]
fn recipes_parse_and_validate() {
    let r: Recipe = "TL+ASE+LM".parse().unwrap();
    assert!(r.transfer && r.language_model);
    assert_eq!(r.aggregation, Some(Aggregation::Ase));
    assert_eq!(r.to_string(), "TL+ASE+LM");
    assert_eq!("lm + tl".parse::<Recipe>().unwrap().to_string(), "TL+LM");
    assert_eq!("base".parse::<Recipe>().unwrap(), Recipe::default());
    for bad in ["MSE+ASE", "TL+TL", "base+TL", "XL", "", "TL++LM"] {
        assert!(bad.parse::<Recipe>().is_err(), "{bad}");
    }
    assert!(Recipe::default().check_members(1).is_ok());
    assert!(Recipe::default().check_members(3).is_err());
    assert!(r.check_members(0).is_err());
}

#[test]
fn transfer_copies_weights_and_checks_fingerprint() {
    let v = vocab();
    let src = checkpoint(&v, 3);
    let (w, head) = transfer_init(&src, v.fingerprint()).unwrap();
    for ids in encode_dataset(&v, &corpus("p", 8), 12) {
        assert_eq!(
            crate::encoder::predict_proba(&w, &head, &ids).unwrap(),
            src.predict_proba(&ids).unwrap()
        );
    }
    assert!(matches!(
        transfer_init(&src, "0000"),
        Err(crate::Error::FingerprintMismatch { .. })
    ));
}

#[test]
fn checkpoint_round_trips_and_rejects_other_tokenizers() {
    let v = vocab();
    let c = checkpoint(&v, 5);
    let back = Checkpoint::from_container(&Container::from_bytes(&c.to_container().to_bytes().unwrap()).unwrap()).unwrap();
    assert_eq!(back, c);
    let other = train_bpe(&["entirely different text"], 5).unwrap();
    assert!(c.predict_text(&other, "zap").is_err());
    assert!(c.predict_text(&v, "zap word1").is_ok());
}

#[test]
fn ensemble_members_must_agree() {
    let v = vocab();
    let mut odd = checkpoint(&v, 2);
    odd.vocab_fingerprint = "other".into();
    assert!(EnsembleModel::new(vec![checkpoint(&v, 1), odd], Aggregation::Ase).is_err());
    assert!(EnsembleModel::new(Vec::new(), Aggregation::Mse).is_err());
}

#[test]
fn single_member_ensemble_matches_the_member() {
    let v = vocab();
    let c = checkpoint(&v, 9);
    let e = EnsembleModel::new(vec![c.clone()], Aggregation::Ase).unwrap();
    for ids in encode_dataset(&v, &corpus("p", 6), 12) {
        let p = c.predict_proba(&ids).unwrap();
        assert_eq!(predict_ase(&e, &ids).unwrap(), (p, p.argmax()));
        assert_eq!(predict_mse(&e, &ids).unwrap(), p.argmax());
    }
}

#[test]
fn duplicate_seeds_warn() {
    let v = vocab();
    let (members, warnings) = train_ensemble(&[4, 4], |_, s| Ok(checkpoint(&v, s))).unwrap();
    assert_eq!(members.len(), 2);
    assert_eq!(warnings.len(), 1);
}

#[test]
fn base_recipe_yields_one_untagged_checkpoint() {
    let v = vocab();
    let train = corpus("t", 16);
    let run = run_recipe(
        &plan("base", &v, vec![1]),
        RecipeData {
            train: &train,
            validation: None,
            source: None,
            vocab: &v,
        },
    )
    .unwrap();
    match run.output {
        RecipeOutput::Single(c) => assert!(c.provenance.tags.is_empty()),
        other => panic!("expected a single checkpoint, got {other:?}"),
    }
    assert!(run.source_model.is_none());
}

#[test]
fn full_recipe_builds_a_tagged_ase_ensemble() {
    let v = vocab();
    let train = corpus("t", 16);
    let source = corpus("s", 24);
    let p = plan("TL+ASE+LM", &v, vec![1, 2, 3]);
    let data = RecipeData {
        train: &train,
        validation: None,
        source: Some(TransferSource::Dataset(&source)),
        vocab: &v,
    };
    let run = run_recipe(&p, data).unwrap();
    let RecipeOutput::Ensemble(e) = &run.output else {
        panic!("expected an ensemble");
    };
    assert_eq!(e.len(), 3);
    assert_eq!(e.aggregation, Aggregation::Ase);
    for m in &e.members {
        assert_eq!(m.provenance.tags, vec![StrategyTag::Transfer, StrategyTag::LanguageModel]);
        assert_eq!(m.provenance.source_task, "s");
    }
    assert_ne!(e.members[0].encoder, e.members[1].encoder);
    assert_eq!(run_recipe(&p, data).unwrap().output, run.output);

    let dir = tempfile::tempdir().unwrap();
    save_ensemble(e, dir.path()).unwrap();
    assert_eq!(&load_ensemble(dir.path()).unwrap(), e);
}

#[test]
fn recipe_preconditions() {
    let v = vocab();
    let train = corpus("t", 16);
    let data = RecipeData {
        train: &train,
        validation: None,
        source: None,
        vocab: &v,
    };
    assert!(run_recipe(&plan("TL", &v, vec![1]), data).is_err());
    assert!(run_recipe(&plan("LM", &v, vec![1, 2]), data).is_err());
    let mut p = plan("MSE", &v, vec![1, 2]);
    p.split_seeds = Some(vec![1]);
    assert!(run_recipe(&p, data).is_err());
    p.split_seeds = Some(vec![10, 11]);
    let run = run_recipe(&p, data).unwrap();
    assert_eq!(run.output.members().len(), 2);
}
