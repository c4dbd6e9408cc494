use criterion::{criterion_group, criterion_main, Criterion};

use bugtriage::costmodel::{fit_lda, LdaParams};
use bugtriage::pipeline::{prepare, Workbench};
use bugtriage::textprep::{build_vocabulary, preprocess_text, tokenize_record, tfidf_transform};
use bugtriage::PolicyKind;
use bugtriage_bench::small_corpus;

fn text(c: &mut Criterion) {
    let (records, _) = small_corpus(500);
    c.bench_function("tokenize_500", |b| {
        b.iter(|| records.iter().map(|r| preprocess_text(&r.summary, &r.description)).collect::<Vec<_>>())
    });
    let docs: Vec<_> = records.iter().map(tokenize_record).collect();
    let vocab = build_vocabulary(&docs, 2).unwrap();
    c.bench_function("tfidf_500", |b| {
        b.iter(|| docs.iter().map(|d| tfidf_transform(&d.tokens, &vocab)).collect::<Vec<_>>())
    });
}

fn topics(c: &mut Criterion) {
    let (records, _) = small_corpus(300);
    let docs: Vec<_> = records.iter().map(tokenize_record).collect();
    let vocab = build_vocabulary(&docs, 2).unwrap();
    let encoded: Vec<Vec<usize>> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
    let mut group = c.benchmark_group("lda");
    group.sample_size(10);
    group.bench_function("k10_100_sweeps", |b| {
        let params = LdaParams {
            iterations: 100,
            ..LdaParams::new(10, 1)
        };
        b.iter(|| fit_lda(&encoded, vocab.len(), &params).unwrap())
    });
    group.finish();
}

fn replay(c: &mut Criterion) {
    let (records, config) = small_corpus(500);
    let bench = Workbench::build(&records, &config).unwrap();
    let mut group = c.benchmark_group("replay");
    group.sample_size(20);
    for policy in [PolicyKind::Cbr, PolicyKind::Rabt, PolicyKind::Dabt] {
        group.bench_function(policy.name(), |b| {
            b.iter(|| bench.simulate(policy, 0.5, config.precedence_mode).unwrap())
        });
    }
    group.bench_function("prepare", |b| b.iter(|| prepare(&records, &config).unwrap()));
    group.finish();
}

criterion_group!(benches, text, topics, replay);
criterion_main!(benches);
