//! Cross-module checks through the public API only.

use olid::classical::{train_mnb, ClassicalModel};
use olid::corpus::{load_tsv, stratified_split, synth_codeswitch, write_tsv, BinaryLabel, LabelAliases, SynthConfig, TsvSchema};
use olid::features::{build_vocabulary, vectorize};
use olid::metrics::EvalReport;
use olid::textprep::{classical_tokens, decode, encode, train_bpe, ClassicalOptions, EmojiTable};
use proptest::prelude::*;

fn small_pair(seed: u64) -> olid::corpus::SynthPair {
    let config = SynthConfig {
        source_docs: 200,
        target_docs: 80,
        ..SynthConfig::default()
    };
    synth_codeswitch(&config, seed).unwrap()
}

#[test]
fn synthetic_corpus_survives_a_tsv_round_trip() {
    let pair = small_pair(1);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("target.tsv");
    write_tsv(&pair.target, &path).unwrap();
    let back = load_tsv(&path, &TsvSchema::default(), &LabelAliases::default()).unwrap();
    assert_eq!(back.documents, pair.target.documents);
}

#[test]
fn naive_bayes_beats_the_majority_baseline() {
    let pair = small_pair(2);
    let (train, validation) = stratified_split(&pair.target, 0.25, 0).unwrap();
    let table = EmojiTable::bundled();
    let tokens = |ds: &olid::LabeledDataset| -> Vec<olid::TokenSequence> {
        ds.texts().map(|t| classical_tokens(t, table, ClassicalOptions::default())).collect()
    };
    let train_tokens = tokens(&train);
    let vocab = build_vocabulary(&train_tokens, 1).unwrap();
    let x: Vec<_> = train_tokens.iter().map(|t| vectorize(&vocab, t)).collect();
    let model = ClassicalModel::Mnb(train_mnb(&x, &train.labels().unwrap(), 1.0).unwrap());
    let preds: Vec<BinaryLabel> = tokens(&validation)
        .iter()
        .map(|t| model.predict(&vectorize(&vocab, t)).unwrap().0)
        .collect();
    let gold = validation.labels().unwrap();
    let report = EvalReport::evaluate(&gold, &preds).unwrap();
    let majority = if gold.iter().filter(|l| **l == BinaryLabel::Off).count() * 2 > gold.len() {
        BinaryLabel::Off
    } else {
        BinaryLabel::Not
    };
    let baseline = EvalReport::evaluate(&gold, &vec![majority; gold.len()]).unwrap();
    assert!(
        report.macro_f1 > baseline.macro_f1 + 0.1,
        "macro F1 {} vs majority {}",
        report.macro_f1,
        baseline.macro_f1
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bpe_encoding_round_trips_short_text(text in "[a-z ]{0,20}", seed in 0u64..4) {
        let pair = small_pair(seed);
        let texts: Vec<&str> = pair.target.texts().collect();
        let vocab = train_bpe(&texts, 30).unwrap();
        let ids = encode(&vocab, &text, 64);
        prop_assert!(ids.is_well_formed());
        prop_assert_eq!(decode(&vocab, &ids).unwrap(), text);
    }

    #[test]
    fn split_sides_partition_the_dataset(fraction in 0.1f64..0.9, seed in 0u64..1000) {
        let pair = small_pair(3);
        let (train, validation) = stratified_split(&pair.target, fraction, seed).unwrap();
        prop_assert_eq!(train.len() + validation.len(), pair.target.len());
        let mut ids: Vec<&str> = train.documents.iter().chain(&validation.documents).map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        prop_assert_eq!(ids.len(), pair.target.len());
    }
}
