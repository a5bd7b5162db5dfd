use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sirec_core::dsp::{forward_transform, generate_stepped_sweep, RirPipeline};
use sirec_core::features::{extract_features, IntervalPair};
use sirec_core::synth::generate_dataset;
use sirec_core::{IntervalBounds, SceneConfig, SirecModel, SweepConfig, TrainConfig, WindowKind};

fn transform(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft");
    for n in [256usize, 4096] {
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| forward_transform(black_box(x)).unwrap())
        });
    }
    group.finish();
}

fn rir(c: &mut Criterion) {
    let cfg = SweepConfig::default();
    let sweep = generate_stepped_sweep(&cfg).unwrap();
    let pipeline = RirPipeline::new(&cfg, 1.0, WindowKind::Hann, true).unwrap();
    c.bench_function("rir_pipeline", |b| {
        b.iter(|| pipeline.measure(black_box(&sweep)).unwrap())
    });
}

fn features(c: &mut Criterion) {
    let segment: Vec<f64> = (0..300).map(|i| (i as f64 * 0.11).cos() / (1.0 + i as f64)).collect();
    let pair = IntervalPair {
        rnd_start: 40,
        length: 120,
    };
    c.bench_function("features_len120", |b| {
        b.iter(|| extract_features(black_box(&segment), pair).unwrap())
    });
}

fn ensemble(c: &mut Criterion) {
    let data = generate_dataset(&SceneConfig::default(), 20, 1).unwrap();
    let cfg = TrainConfig::new(100, 300, IntervalBounds::new(17, 153), 7);
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    group.bench_function("fit_300rows_100trees", |b| {
        b.iter(|| SirecModel::fit(&data, &cfg).unwrap())
    });
    let model = SirecModel::fit(&data, &cfg).unwrap();
    let rirs: Vec<&[f64]> = data.rows().iter().map(|r| r.rir.as_slice()).collect();
    group.bench_function("predict_one", |b| b.iter(|| model.predict(black_box(rirs[0])).unwrap()));
    group.bench_function("predict_batch_300", |b| {
        b.iter(|| model.predict_batch(black_box(&rirs)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, transform, rir, features, ensemble);
criterion_main!(benches);
