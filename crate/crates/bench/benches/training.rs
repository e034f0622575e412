use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ocdeepiv_bench::{fit, EstimatorKind, FitOptions};
use ocdeepiv_core::model::INIT_STREAM;
use ocdeepiv_core::{
    build_features, gen_code_faithful, moving_average, ortho_grad, staged_train, DgpSpec, DualPathNet, RngStream,
    TrainConfig,
};

fn kernels(c: &mut Criterion) {
    let mut rng = RngStream::new(0, 0);
    let x = rng.sample_standard_normal(10_000, 64);
    let w = rng.sample_standard_normal(64, 64);
    c.bench_function("matmul_nt 10000x64 by 64x64", |b| b.iter(|| black_box(&x).matmul_nt(black_box(&w)).unwrap()));
    c.bench_function("matmul_tn 64x10000 by 10000x64", |b| b.iter(|| black_box(&x).matmul_tn(black_box(&x)).unwrap()));

    let v: Vec<f64> = (0..10_000).map(|_| rng.standard_normal()).collect();
    c.bench_function("moving_average n=10000 w=15", |b| b.iter(|| moving_average(black_box(&v), 15).unwrap()));

    let net = DualPathNet::treatment(0.3, &mut RngStream::new(0, INIT_STREAM)).unwrap();
    c.bench_function("ortho_grad treatment net", |b| b.iter(|| ortho_grad(black_box(&net), 0.02)));
}

fn training(c: &mut Criterion) {
    let data = gen_code_faithful(10_000, 0).unwrap();
    let features = build_features(&data.x, &data.t).unwrap();
    let cfg = TrainConfig {
        epochs: 1,
        switch_epoch: 0,
        ..Default::default()
    };
    let net = DualPathNet::treatment(cfg.dropout_p, &mut RngStream::new(0, INIT_STREAM)).unwrap();
    let mut group = c.benchmark_group("training");
    group.sample_size(10);
    group.bench_function("one penalised epoch N=10000", |b| {
        b.iter(|| staged_train(net.clone(), &data.z, &features, &data.t, &cfg).unwrap())
    });
    group.finish();
}

fn baselines(c: &mut Criterion) {
    let data = DgpSpec::confounded(10_000, 0).generate().unwrap();
    let opts = FitOptions::default();
    let mut group = c.benchmark_group("baselines N=10000");
    for kind in [EstimatorKind::NaiveOls, EstimatorKind::TwoSls, EstimatorKind::LinearDml] {
        group.bench_function(kind.name(), |b| b.iter(|| fit(kind, black_box(&data), &opts).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, kernels, training, baselines);
criterion_main!(benches);
