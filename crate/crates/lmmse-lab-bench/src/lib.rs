//! Shared fixtures for the criterion benchmarks.

use lmmse_lab::experiments::gaussian_campaign_model;
use lmmse_lab::model::{solve_lmmse, LinearModel, LmmseSolution};
use lmmse_lab::sampling::{experiment_stream, sample_gaussian_pairs, SampleBatch, SeedSpec};
use lmmse_lab::ExperimentConfig;

/// Reproducible random model with the campaign's covariance structure.
pub fn bench_model(dim: usize) -> LinearModel {
    let mut cfg = ExperimentConfig::new(dim, dim);
    cfg.master_seed = 42;
    gaussian_campaign_model(&cfg).expect("benchmark model is well posed")
}

pub fn bench_solution(model: &LinearModel) -> LmmseSolution {
    solve_lmmse(model).expect("benchmark model solves")
}

pub fn bench_batch(model: &LinearModel, n: usize) -> SampleBatch {
    let seed = SeedSpec::new(42, experiment_stream(1, 0));
    sample_gaussian_pairs(model, n, seed).expect("benchmark batch samples")
}
