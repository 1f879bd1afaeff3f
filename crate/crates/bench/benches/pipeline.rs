use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};

use egogaze::gaze::DEFAULT_DISPERSION_DEG;
use egogaze::scene::CameraModel;
use egogaze::synth::{synth_corpus, DogPlan, SynthConfig};
use egogaze::{
    batch_attribute, chi_square_critical, extract_fixations, BatchOptions, FixationParams,
};
use egogaze_bench::walk;

fn attribution(c: &mut Criterion) {
    let w = walk(7, 4, 500);
    let mut group = c.benchmark_group("pipeline");
    group.throughput(Throughput::Elements(w.fixations.len() as u64));
    group.bench_function("batch_attribute", |b| {
        b.iter(|| {
            batch_attribute(
                black_box(&w.fixations),
                &w.corpora,
                &w.profiles,
                &BatchOptions::default(),
            )
            .unwrap()
        })
    });
    group.finish();
}

fn fixations(c: &mut Criterion) {
    let cfg = SynthConfig {
        seed: 3,
        camera: CameraModel::reference(160, 120).unwrap(),
        dogs: vec![DogPlan {
            id: "d".into(),
            accuracy_deg: 5.32,
        }],
        fixations_per_dog: 1000,
        ..SynthConfig::default()
    };
    let out = synth_corpus(&cfg).unwrap();
    let samples = &out.gaze["d"];
    let params = FixationParams::for_camera(&cfg.camera, DEFAULT_DISPERSION_DEG);
    let mut group = c.benchmark_group("pipeline");
    group.throughput(Throughput::Elements(samples.len() as u64));
    group.bench_function("extract_fixations", |b| {
        b.iter(|| extract_fixations("d", black_box(samples), &params, &cfg.camera).unwrap())
    });
    group.finish();
}

fn critical_value(c: &mut Criterion) {
    c.bench_function("chi_square_critical", |b| {
        b.iter(|| chi_square_critical(black_box(15), black_box(0.05)).unwrap())
    });
}

criterion_group!(benches, attribution, fixations, critical_value);
criterion_main!(benches);
