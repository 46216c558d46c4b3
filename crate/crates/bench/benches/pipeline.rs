use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use tagscope_bench::{mixed_clip, planted, progression, small_params, trained};
use tagscope_core::explain::shap_values;
use tagscope_core::gbdt::train_standardized;
use tagscope_core::harmony::analyze_chords;
use tagscope_core::signal::{mfcc, signal_descriptors, stft, FRAME_SIZE, HOP_SIZE};
use tagscope_core::VocalFlag;

fn bench_signal(c: &mut Criterion) {
    let clip = mixed_clip();
    let mut g = c.benchmark_group("signal");
    g.sample_size(10);
    g.bench_function("stft 10 s", |b| {
        b.iter(|| stft(black_box(&clip), FRAME_SIZE, HOP_SIZE).unwrap())
    });
    g.bench_function("descriptors 10 s", |b| {
        b.iter(|| signal_descriptors(black_box(&clip), None, VocalFlag::Unknown).unwrap())
    });
    g.bench_function("mfcc 10 s", |b| b.iter(|| mfcc(black_box(&clip)).unwrap()));
    g.finish();
}

fn bench_harmony(c: &mut Criterion) {
    let chords = progression();
    c.bench_function("harmonic features, 16 chords", |b| {
        b.iter(|| analyze_chords(black_box(&chords), None))
    });
}

fn bench_gbdt(c: &mut Criterion) {
    let (x, labels, names) = planted(1000);
    let params = small_params();
    let mut g = c.benchmark_group("gbdt");
    g.sample_size(10);
    g.bench_function("train 1000 x 62, 4 labels, 20 trees", |b| {
        b.iter(|| train_standardized(black_box(&x), &labels, &names, &params).unwrap())
    });
    g.finish();
}

fn bench_shap(c: &mut Criterion) {
    let (model, rows) = trained(1000);
    let label = model.label_names[0].clone();
    c.bench_function("tree shap, 20 trees", |b| {
        let mut i = 0;
        b.iter(|| {
            i = (i + 1) % rows.len();
            shap_values(&model, black_box(&rows[i]), &label).unwrap()
        })
    });
}

criterion_group!(benches, bench_signal, bench_harmony, bench_gbdt, bench_shap);
criterion_main!(benches);
