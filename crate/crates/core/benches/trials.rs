//! Parallel versus sequential trial execution. With the `parallel` feature
//! off, both variants run sequentially, which is itself a useful baseline.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use learned_treap::experiment::{run_synthetic, run_theory_check, ExperimentConfig, StructureKind, TheoryCheck};
use learned_treap::par::Execution;
use learned_treap::workload::ZipfSpec;

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn synthetic(c: &mut Criterion) {
    let mut group = c.benchmark_group("synthetic_trials");
    group.sample_size(10);
    for (name, execution) in MODES {
        let mut config = ExperimentConfig::synthetic(
            ZipfSpec::new(2000, 1.0, 20_000, 1),
            vec![StructureKind::LearnedTreap, StructureKind::Splay, StructureKind::RedBlack],
        );
        config.trials = 8;
        config.execution = execution;
        group.bench_with_input(BenchmarkId::from_parameter(name), &config, |b, config| {
            b.iter(|| black_box(run_synthetic(config).unwrap()))
        });
    }
    group.finish();
}

fn depth_profile(c: &mut Criterion) {
    let mut group = c.benchmark_group("random_depth_trials");
    group.sample_size(10);
    let check = TheoryCheck::RandomDepth {
        n: 1000,
        trials: 200,
        indices: vec![1, 500, 1000],
    };
    for (name, execution) in MODES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &execution, |b, &execution| {
            b.iter(|| black_box(run_theory_check(&check, 7, execution).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, synthetic, depth_profile);
criterion_main!(benches);
