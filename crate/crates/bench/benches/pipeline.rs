use criterion::{criterion_group, criterion_main, Criterion};
use invlearn::{build_level_family, closed_loop, plants, BoundSet, Interpolant, NumericalPlant};
use invlearn_bench::*;
use std::hint::black_box;

fn fit(c: &mut Criterion) {
    let ds = numerical_dataset();
    let inputs = ds.inputs();
    let kernel = numerical_kernel();
    c.bench_function("gram_numerical_280", |b| b.iter(|| kernel.gram(black_box(&inputs)).unwrap()));
    c.bench_function("fit_numerical_280", |b| {
        b.iter(|| Interpolant::fit(kernel.clone(), black_box(&ds), 0.0).unwrap())
    });
    let pds = pendulum_dataset();
    let mut group = c.benchmark_group("pendulum");
    group.sample_size(10);
    group.bench_function("fit_1188", |b| {
        b.iter(|| Interpolant::fit(pendulum_kernel(), black_box(&pds), 0.0).unwrap())
    });
    let bounds = pendulum_bounds();
    group.bench_function("family_delta_0.05", |b| {
        b.iter(|| build_level_family(black_box(&pds), &bounds, 0.05, 100).unwrap())
    });
    group.finish();
}

fn families(c: &mut Criterion) {
    let ds = numerical_dataset();
    let bounds = BoundSet::numerical_benchmark();
    c.bench_function("families_numerical_all_deltas", |b| {
        b.iter(|| {
            NUMERICAL_DELTAS
                .iter()
                .map(|&d| build_level_family(black_box(&ds), &bounds, d, 20).unwrap())
                .collect::<Vec<_>>()
        })
    });
}

fn control(c: &mut Criterion) {
    let cfg = numerical_controller();
    c.bench_function("control_step_numerical", |b| b.iter(|| cfg.control(black_box(&[0.3, 0.3, 0.5])).unwrap()));
    c.bench_function("closed_loop_numerical_10", |b| {
        b.iter(|| {
            let mut rng = plants::rng_stream(0, 0);
            closed_loop(&cfg, &NumericalPlant, black_box(&[1.0, 1.0, 0.0]), 10, 0.0, &mut rng).unwrap()
        })
    });
}

criterion_group!(benches, fit, families, control);
criterion_main!(benches);
