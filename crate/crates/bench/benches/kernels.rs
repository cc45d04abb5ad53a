use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use graft_bench::{matrix, scores, ModelFixture};
use graft_core::entmax::entmax;
use graft_core::hopfield::gsh_attention;
use graft_core::model::{predict, sample_tensors, SourceSwitch};
use graft_core::training::{examples, train, TrainConfig};
use graft_core::Alpha;

fn bench_entmax(c: &mut Criterion) {
    let mut g = c.benchmark_group("entmax");
    for n in [16, 128, 1024] {
        let z = scores(n, n as u64);
        for a in [1.0, 1.5, 2.0] {
            let alpha = Alpha::new(a).unwrap();
            g.bench_with_input(BenchmarkId::new(format!("alpha={a}"), n), &z, |b, z| {
                b.iter(|| entmax(black_box(z), alpha).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_attention(c: &mut Criterion) {
    let mut g = c.benchmark_group("gsh_attention");
    let d = 32;
    let (wq, wk, wv) = (matrix(d, d, 1), matrix(d, d, 2), matrix(d, d, 3));
    for len in [28, 112] {
        let (r, y) = (matrix(len, d, 4), matrix(len, d, 5));
        for a in [1.0, 1.5, 2.0] {
            let alpha = Alpha::new(a).unwrap();
            g.bench_function(BenchmarkId::new(format!("alpha={a}"), len), |b| {
                b.iter(|| gsh_attention(&r, &y, &wq, &wk, &wv, 0.25, alpha).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_model(c: &mut Criterion) {
    let mut g = c.benchmark_group("model");
    g.sample_size(20);
    for switch in [SourceSwitch::NoExt, SourceSwitch::All] {
        let fx = ModelFixture::new(16, switch);
        let s = fx.sample();
        let (input, _) = sample_tensors(&fx.prepared.stats, s).unwrap();
        g.bench_function(BenchmarkId::new("predict", switch.code()), |b| {
            b.iter(|| predict(&fx.store, &fx.cfg, black_box(&input), &s.text, None).unwrap())
        });
        let batch = examples(&fx.prepared.stats, &fx.prepared.splits.train[..8]).unwrap();
        let tc = TrainConfig { epochs: 1, batch_size: 8, lr: 1e-3, ..TrainConfig::default() };
        g.bench_function(BenchmarkId::new("train_step", switch.code()), |b| {
            b.iter_batched(
                || fx.store.clone(),
                |mut store| train(&batch, &mut store, &fx.cfg, &tc, None).unwrap(),
                criterion::BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

criterion_group!(kernels, bench_entmax, bench_attention);
criterion_group!(model, bench_model);
criterion_main!(kernels, model);
