use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use olid::classical::{train_mnb, train_random_forest, ForestParams};
use olid::encoder::{forward, init_encoder, init_head, train_classifier};
use olid::features::{build_vocabulary, vectorize};
use olid::strategies::ase_average;
use olid::textprep::{classical_tokens, encode, train_bpe, ClassicalOptions, EmojiTable};
use olid::{EncoderConfig, ProbabilityDistribution, TokenSequence, TrainHyper};
use olid_bench::corpus;

fn tokenization(c: &mut Criterion) {
    let pair = corpus(500, 100);
    let texts: Vec<&str> = pair.source.texts().collect();
    c.bench_function("bpe_train_200_merges", |b| b.iter(|| train_bpe(black_box(&texts), 200).unwrap()));
    let vocab = train_bpe(&texts, 200).unwrap();
    c.bench_function("bpe_encode_corpus", |b| {
        b.iter(|| texts.iter().map(|t| encode(&vocab, black_box(t), 64).attention_length).sum::<usize>())
    });
    let table = EmojiTable::bundled();
    c.bench_function("classical_tokens_corpus", |b| {
        b.iter(|| texts.iter().map(|t| classical_tokens(black_box(t), table, ClassicalOptions::default()).len()).sum::<usize>())
    });
}

fn classical(c: &mut Criterion) {
    let pair = corpus(1000, 100);
    let table = EmojiTable::bundled();
    let tokens: Vec<TokenSequence> =
        pair.source.texts().map(|t| classical_tokens(t, table, ClassicalOptions::default())).collect();
    let vocab = build_vocabulary(&tokens, 1).unwrap();
    let x: Vec<_> = tokens.iter().map(|t| vectorize(&vocab, t)).collect();
    let y = pair.source.labels().unwrap();
    c.bench_function("mnb_train_1000_docs", |b| b.iter(|| train_mnb(black_box(&x), &y, 1.0).unwrap()));
    let mut group = c.benchmark_group("forest");
    group.sample_size(10);
    group.bench_function("rf_train_50_trees_1000_docs", |b| {
        b.iter(|| {
            let params = ForestParams {
                n_trees: 50,
                ..ForestParams::default()
            };
            train_random_forest(black_box(&x), &y, params).unwrap()
        })
    });
    group.finish();
}

fn encoder(c: &mut Criterion) {
    let pair = corpus(200, 100);
    let texts: Vec<&str> = pair.target.texts().collect();
    let vocab = train_bpe(&texts, 200).unwrap();
    let config = EncoderConfig::default().with_vocab(vocab.len());
    let w = init_encoder(&config, 0).unwrap();
    let head = init_head(&config, 0);
    let ids = encode(&vocab, texts[0], config.max_len);
    c.bench_function("encoder_forward_default_config", |b| {
        b.iter(|| forward(&w, &head, black_box(&ids), false, 0).unwrap())
    });
    let mut group = c.benchmark_group("encoder_training");
    group.sample_size(10);
    let hyper = TrainHyper {
        learning_rate: 1e-3,
        epochs: 1,
        ..TrainHyper::default()
    };
    group.bench_function("finetune_one_epoch_100_docs", |b| {
        b.iter_batched(
            || w.clone(),
            |w| train_classifier(&w, &head, &pair.target, None, &vocab, &hyper).unwrap(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

fn aggregation(c: &mut Criterion) {
    let members: Vec<ProbabilityDistribution> = (0..9)
        .map(|k| ProbabilityDistribution::new([k as f64 / 10.0, 1.0 - k as f64 / 10.0]).unwrap())
        .collect();
    c.bench_function("ase_average_9_members", |b| b.iter(|| ase_average(black_box(&members)).unwrap()));
}

criterion_group!(benches, tokenization, classical, encoder, aggregation);
criterion_main!(benches);
