use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{DMatrix, DVector};
use polygmdh::synth::generate_neuron_task;
use polygmdh::{generate_poly_task, grow, lsm_fit, projection_fit, split, FitConfig, Fitter, GrowthConfig, TransferKind};

fn neuron_fits(c: &mut Criterion) {
    let task = generate_neuron_task(TransferKind::Bilinear, 500, 500, 0.0, 1).unwrap();
    let (u, y): (&DMatrix<f64>, &DVector<f64>) = (&task.design.u_a, &task.design.y_a);
    c.bench_function("lsm_fit 4x500", |b| b.iter(|| lsm_fit(black_box(u), black_box(y)).unwrap()));
    let cfg = FitConfig::default();
    c.bench_function("projection_fit 4x500", |b| {
        b.iter(|| projection_fit(black_box(&task.design), &cfg).unwrap())
    });
}

fn growth(c: &mut Criterion) {
    let task = generate_poly_task(2, 8, 400, 0.0, 3).unwrap();
    let parts = split(&task.data, 0.5, 3, true).unwrap();
    let (a, b) = (task.data.subset(&parts.a), task.data.subset(&parts.b));
    let mut group = c.benchmark_group("grow m=8 n=400");
    group.sample_size(20);
    for (name, fitter) in [("lsm", Fitter::Lsm), ("projection", Fitter::default())] {
        let cfg = GrowthConfig {
            width: 6,
            fitter,
            ..GrowthConfig::default()
        };
        group.bench_function(name, |bench| bench.iter(|| grow(black_box(&a), black_box(&b), &cfg).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, neuron_fits, growth);
criterion_main!(benches);
