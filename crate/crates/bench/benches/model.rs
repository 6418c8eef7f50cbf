use criterion::{criterion_group, criterion_main, Criterion};

use cgt_core::data::{synthesize_corpus, Grammar, SynthOptions};
use cgt_core::losses::LossWeights;
use cgt_core::train::{batch_objective, prepare, restoration_table, Corpus, RunConfig, Trainer};

fn setup() -> (cgt_core::train::Prepared, RunConfig) {
    let g = Grammar::default();
    let synth = synthesize_corpus(&SynthOptions { seed: 0, cases: 16, ..SynthOptions::default() }, &g).unwrap();
    let corpus = Corpus::from_synth(&synth);
    let config = RunConfig {
        min_frequency: 1,
        epochs: 1,
        ..RunConfig::default()
    };
    let data = prepare(&corpus, g.extractor(), 1, config.max_report_len).unwrap();
    (data, config)
}

fn bench_model(c: &mut Criterion) {
    let (data, config) = setup();
    let trainer = Trainer::new(config.clone(), data.vocab.len()).unwrap();
    let model = trainer.best_model();
    let features = &data.cases[0].features;
    c.bench_function("generate_greedy", |b| b.iter(|| model.generate_greedy(features).unwrap()));

    let batch: Vec<_> = data.cases.iter().take(config.batch_size).collect();
    let negatives: Vec<_> = batch.iter().enumerate().map(|(i, case)| trainer.negatives(&data.graph, case, 1, i)).collect();
    let table = restoration_table(&model).unwrap();
    let weights = LossWeights::default();
    c.bench_function("batch_objective_with_grad", |b| {
        b.iter(|| batch_objective(&model, &batch, &negatives, &table, &weights, true).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_model
}
criterion_main!(benches);
