use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use mdd_pdmp::analytics::{mean_curve_expm, mean_curve_rk4, DEFAULT_RK4_STEP};
use mdd_pdmp::model::reference_two_state;
use mdd_pdmp::simulate::{simulate_values_sequential, EnsembleConfig, JumpConvention};
use mdd_pdmp::TimeGrid;

fn config(n_paths: usize) -> EnsembleConfig {
    EnsembleConfig {
        r0: 0.0,
        initial_state: None,
        grid: TimeGrid::uniform(50.0, 0.5).unwrap(),
        n_paths,
        seed: 42,
        convention: JumpConvention::Destination,
    }
}

fn ensemble(c: &mut Criterion) {
    let spec = reference_two_state();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for n in [1_000, 10_000] {
        let cfg = config(n);
        group.bench_with_input(BenchmarkId::new("sequential", n), &cfg, |b, cfg| {
            b.iter(|| simulate_values_sequential(black_box(&spec), cfg).unwrap())
        });
        #[cfg(feature = "parallel")]
        group.bench_with_input(BenchmarkId::new("parallel", n), &cfg, |b, cfg| {
            b.iter(|| mdd_pdmp::simulate::simulate_values_parallel(black_box(&spec), cfg).unwrap())
        });
    }
    group.finish();
}

fn mean_routes(c: &mut Criterion) {
    let spec = reference_two_state();
    let grid = TimeGrid::uniform(50.0, 0.5).unwrap();
    let mut group = c.benchmark_group("mean_curve");
    group.bench_function("expm", |b| b.iter(|| mean_curve_expm(black_box(&spec), 0.0, &grid).unwrap()));
    group.bench_function("rk4", |b| {
        b.iter(|| mean_curve_rk4(black_box(&spec), 0.0, &grid, DEFAULT_RK4_STEP).unwrap())
    });
    group.finish();
}

criterion_group!(benches, ensemble, mean_routes);
criterion_main!(benches);
