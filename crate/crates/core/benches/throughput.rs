//! Sequential vs data-parallel throughput of the hot paths. The "1 thread"
//! variant runs inside a single-thread rayon pool; "all threads" uses the
//! global pool. Built without the `parallel` feature both variants run the
//! sequential code.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rayon::ThreadPoolBuilder;
use xvanon::gmm::{self, GmmConfig};
use xvanon::stats::similarity::cross_similarities;
use xvanon::stats::parameter_sweep;
use xvanon::strategy::{anonymize_set, FakeGranularity, Strata, Strategy};
use xvanon::synth::{generate_population, PopulationSpec};
use xvanon::{pca, AnonymizerModel, EmbeddingSet, Gender};

fn population() -> EmbeddingSet {
    generate_population(&PopulationSpec::default()).unwrap()
}

fn compare<F: Fn() + Sync>(c: &mut Criterion, name: &str, work: F) {
    let single = ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function(BenchmarkId::from_parameter("1 thread"), |b| b.iter(|| single.install(&work)));
    group.bench_function(BenchmarkId::from_parameter("all threads"), |b| b.iter(&work));
    group.finish();
}

fn similarities(c: &mut Criterion) {
    let pop = population();
    compare(c, "cross_similarities_2000", || {
        std::hint::black_box(cross_similarities(&pop).unwrap());
    });
}

fn em(c: &mut Criterion) {
    let pop = population().filter(|e| e.gender() == Gender::Male);
    let pca = pca::fit(&pop, 0.95).unwrap();
    let reduced = pca.transform_all(pop.vectors()).unwrap();
    compare(c, "gmm_fit_k20", || {
        std::hint::black_box(gmm::fit(&reduced, &GmmConfig::new(20, 1)).unwrap());
    });
}

fn anonymize(c: &mut Criterion) {
    let pop = population();
    let models: Strata<AnonymizerModel> = pop
        .by_gender()
        .into_iter()
        .map(|(g, s)| (g, AnonymizerModel::train_for(&s, g, 0.95, 20, 1).unwrap()))
        .collect();
    compare(c, "anonymize_per_utterance", || {
        let out = anonymize_set(&pop, &Strategy::Ours(&models), FakeGranularity::PerUtterance, 2).unwrap();
        std::hint::black_box(out);
    });
}

fn sweep(c: &mut Criterion) {
    let pop = population();
    compare(c, "sweep_3x3", || {
        std::hint::black_box(parameter_sweep(&pop, &[0.90, 0.95, 0.99], &[1, 5, 20], 0.5, 3).unwrap());
    });
}

criterion_group!(benches, similarities, em, anonymize, sweep);
criterion_main!(benches);
