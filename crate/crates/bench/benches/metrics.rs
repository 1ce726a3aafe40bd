use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ndarray::Array2;
use std::hint::black_box;

use purity_core::data::{gen_correlated_concepts, gen_impure_reps};
use purity_core::niche::{niche_impurity, NicheConfig};
use purity_core::numeric::{auc_roc, mlp_train, Loss, MlpSpec, OutputActivation, TrainConfig};
use purity_core::purity::{purity_matrix, ProbeConfig};

fn auc(c: &mut Criterion) {
    let mut group = c.benchmark_group("auc_roc");
    for n in [1_000usize, 10_000, 100_000] {
        let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 1009) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|i| (i * 31) % 3 == 0).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| auc_roc(black_box(&scores), black_box(&labels)).unwrap())
        });
    }
    group.finish();
}

fn probe_training(c: &mut Criterion) {
    let x = Array2::from_shape_fn((2400, 1), |(r, _)| (r % 97) as f64 / 97.0);
    let y = Array2::from_shape_fn((2400, 1), |(r, _)| f64::from(u8::from(r % 97 > 40)));
    let spec = MlpSpec::new(1, &[32], 1, OutputActivation::Sigmoid);
    let cfg = TrainConfig {
        epochs: 25,
        batch_size: 128,
        learning_rate: 1e-3,
        seed: 0,
        loss: Loss::BinaryCrossEntropy,
    };
    c.bench_function("probe_fit_2400x1", |b| {
        b.iter(|| mlp_train(&spec, x.view(), y.view(), &cfg).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let data = gen_correlated_concepts(3000, 5, 0.25, 0).unwrap();
    let reps = gen_impure_reps(&data, 0).unwrap();
    let mut group = c.benchmark_group("metrics");
    group.sample_size(10);
    group.bench_function("purity_matrix_k5_n3000", |b| {
        b.iter(|| purity_matrix(&reps, &data, &ProbeConfig::default(), 0).unwrap())
    });
    let niche = NicheConfig::default();
    group.bench_function("niche_impurity_k5_n3000", |b| {
        b.iter(|| niche_impurity(&reps, &data, 0, 0.5, &niche, 0).unwrap())
    });
    group.finish();
}

criterion_group!(benches, auc, probe_training, metrics);
criterion_main!(benches);
