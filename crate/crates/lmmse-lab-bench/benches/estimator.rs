use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use lmmse_lab::experiments::{empirical_tail, wishart_trace_experiment};
use lmmse_lab::least_squares::fit_least_squares;
use lmmse_lab::model::solve_lmmse;
use lmmse_lab::sampling::{experiment_stream, sample_gaussian_pairs, SeedSpec};
use lmmse_lab_bench::{bench_batch, bench_model, bench_solution};

fn bench_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_lmmse");
    for dim in [16, 64, 128] {
        let model = bench_model(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &model, |b, model| {
            b.iter(|| solve_lmmse(black_box(model)).unwrap())
        });
    }
    group.finish();
}

fn bench_fit(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_least_squares");
    for (dim, n) in [(16, 81), (16, 33), (64, 321)] {
        let model = bench_model(dim);
        let batch = bench_batch(&model, n);
        let id = format!("M{dim}_n{n}");
        group.bench_with_input(BenchmarkId::from_parameter(id), &batch, |b, batch| {
            b.iter(|| fit_least_squares(black_box(batch)).unwrap())
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let model = bench_model(16);
    c.bench_function("sample_gaussian_pairs/M16_n81", |b| {
        b.iter(|| {
            let seed = SeedSpec::new(7, experiment_stream(1, 3));
            sample_gaussian_pairs(black_box(&model), 81, seed).unwrap()
        })
    });
}

fn bench_wishart(c: &mut Criterion) {
    c.bench_function("wishart_trace/M16_n81_r10", |b| {
        b.iter(|| wishart_trace_experiment(16, 81, 10, black_box(5)).unwrap())
    });
}

fn bench_tail(c: &mut Criterion) {
    let model = bench_model(16);
    let sol = bench_solution(&model);
    let values: Vec<f64> = (0..300).map(|i| sol.mse * (1.0 + i as f64 / 300.0)).collect();
    let taus: Vec<f64> = (0..64).map(|i| 1.0 + i as f64 / 16.0).collect();
    c.bench_function("empirical_tail/300x64", |b| {
        b.iter(|| empirical_tail(black_box(&values), sol.mse, black_box(&taus)).unwrap())
    });
}

criterion_group!(benches, bench_solve, bench_fit, bench_sampling, bench_wishart, bench_tail);
criterion_main!(benches);
