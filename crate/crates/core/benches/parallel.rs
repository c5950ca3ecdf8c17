use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use flowembed::baselines::{LassoConfig, LassoDesign};
use flowembed::datagen::{build_training_set, sample_rng};
use flowembed::model::network::lattice_basis;
use flowembed::model::train::{batch_objective, evaluate_objective};
use flowembed::model::{encode_batch, EncoderConfig, ModelParams, TrainConfig};
use flowembed::phasefield::Lattice;
use flowembed::Exec;
use flowembed_tensor::Mode;

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn bench(c: &mut Criterion) {
    let lattice = Lattice::centered(2, 64).unwrap();
    let data = build_training_set(&mut sample_rng(0, 0), 16, &lattice, 3, Exec::Sequential).unwrap();
    let fields = data.fields();
    let params = ModelParams::init(EncoderConfig::standard(2, 64), &mut sample_rng(1, 0)).unwrap();
    let design = LassoDesign::new(data.dictionary(), lattice.clone()).unwrap();
    let basis = lattice_basis(&params, &lattice).unwrap();
    let train = TrainConfig::default();

    let mut g = c.benchmark_group("exec");
    g.sample_size(10);
    for (name, exec) in POLICIES {
        g.bench_with_input(BenchmarkId::new("encode_16", name), &exec, |b, &exec| {
            b.iter(|| encode_batch(black_box(&params), &fields, exec).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("lasso_16", name), &exec, |b, &exec| {
            b.iter(|| design.fit_many(black_box(&fields), &LassoConfig::default(), exec).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("objective_16", name), &exec, |b, &exec| {
            b.iter(|| evaluate_objective(black_box(&params), &fields, &train, exec).unwrap())
        });
    }
    g.finish();

    c.bench_function("train_step_16", |b| {
        b.iter(|| {
            let mut stats = params.bn.clone();
            let mut rng = sample_rng(2, 0);
            batch_objective(&params, &mut stats, &fields, &basis, &train, Mode::Train, &mut rng).unwrap()
        })
    });
}

criterion_group!(benches, bench);
criterion_main!(benches);
