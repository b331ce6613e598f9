//! Monte Carlo campaigns: tail distributions of the learned estimator's
//! exact MSE for random Gaussian models and for image denoising, plus
//! the Wishart trace experiment behind the expected-excess law.
//!
//! Determinism contract: every replication draws from its own RNG
//! stream, `experiment·2³² + attempt·replications + r`, so a campaign is
//! a pure function of its config and parallel execution is bitwise
//! equal to serial. Stream block 0 of each campaign is reserved for
//! model setup; the ε at index `j` runs as experiment `j+1`.

use nalgebra::{Cholesky, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_io::{rows_without_replacement_with, ImageDataset};
use crate::error::{LabError, Result};
use crate::least_squares::{fit_least_squares, test_error};
use crate::model::{build_model, mse_of_linear, solve_lmmse, LinearModel, LmmseSolution};
use crate::planner::{asymptotic_gaussian_limit, expected_approx_error_gaussian, n_expected_gaussian};
use crate::sampling::{
    experiment_stream, sample_gaussian_pairs, spd_with, standard_normal_matrix,
    uniform_noise_with, SampleBatch, SeedSpec,
};

/// Failed replications are retried on fresh stream blocks this many times.
const MAX_RETRIES: usize = 3;

/// Eigenvalues of the random covariances are uniform on [floor, 1); the
/// tiny floor only rules out numerically singular draws.
const SPD_EIG_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Data dimension M.
    pub m: usize,
    /// Parameter dimension N.
    pub n_dim: usize,
    pub eps_list: Vec<f64>,
    pub replications: usize,
    pub master_seed: u64,
    /// Sorted thresholds τ ≥ 1; empty means the default grid.
    pub tau_grid: Vec<f64>,
    /// Noise level for the denoising campaign.
    pub sigma: f64,
    pub parallel_workers: usize,
}

impl ExperimentConfig {
    pub fn new(m: usize, n_dim: usize) -> Self {
        ExperimentConfig {
            m,
            n_dim,
            eps_list: vec![1.0 / 16.0, 0.25, 0.5, 1.0],
            replications: 300,
            master_seed: 0,
            tau_grid: Vec::new(),
            sigma: 0.1,
            parallel_workers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n_dim == 0 {
            return Err(LabError::invalid("M", "dimensions must be positive"));
        }
        if self.eps_list.is_empty() {
            return Err(LabError::invalid("eps_list", "need at least one tolerance"));
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(LabError::invalid("eps_list", "tolerances must be positive and finite"));
        }
        if self.replications == 0 {
            return Err(LabError::invalid("replications", "need at least one replication"));
        }
        if self.eps_list.len() >= u32::MAX as usize {
            return Err(LabError::invalid("eps_list", "too many tolerances"));
        }
        if self.tau_grid.iter().any(|&t| !(t >= 1.0 && t.is_finite())) {
            return Err(LabError::invalid("tau_grid", "thresholds must be finite and >= 1"));
        }
        if self.tau_grid.windows(2).any(|w| w[0] > w[1]) {
            return Err(LabError::invalid("tau_grid", "thresholds must be sorted ascending"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(LabError::invalid("sigma", format!("need sigma > 0, got {}", self.sigma)));
        }
        if self.parallel_workers == 0 {
            return Err(LabError::invalid("parallel_workers", "need at least one worker"));
        }
        Ok(())
    }
}

/// Tail summary of one (campaign, ε) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub eps: f64,
    pub n: usize,
    /// Exact MSE per replication, each ≥ `trace_cee`.
    pub mse_values: Vec<f64>,
    /// Test-set MSE per replication (denoising only).
    pub test_values: Option<Vec<f64>>,
    pub tau_grid: Vec<f64>,
    /// Fraction of `mse_values` strictly above τ·trace_cee, per τ.
    pub exceed_fractions: Vec<f64>,
    /// `trace(C_EE)·(1 + M/(n−M−1))`, the Gaussian expectation.
    pub reference_expected: f64,
    /// `trace(C_EE)·(1 + γ/(1−γ))` at γ = M/n.
    pub reference_asymptotic: f64,
    pub trace_cee: f64,
    /// Replication attempts that hit rank deficiency and were redrawn.
    pub retries: usize,
}

/// Fraction of values strictly greater than τ·trace_cee for each τ.
pub fn empirical_tail(values: &[f64], trace_cee: f64, tau_grid: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(LabError::invalid("values", "need at least one value"));
    }
    if !(trace_cee > 0.0 && trace_cee.is_finite()) {
        return Err(LabError::invalid(
            "trace_cee",
            format!("need a positive trace, got {trace_cee}"),
        ));
    }
    let total = values.len() as f64;
    Ok(tau_grid
        .iter()
        .map(|&tau| values.iter().filter(|&&v| v > tau * trace_cee).count() as f64 / total)
        .collect())
}

/// `trace(C_EE) = Σ ξᵢσ²/(ξᵢ+σ²)` for denoising with `A = I`, `Czz = σ²I`.
pub fn denoise_mse_formula(eigenvalues: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(LabError::invalid("sigma", format!("need sigma > 0, got {sigma}")));
    }
    if eigenvalues.iter().any(|&xi| !(xi >= 0.0 && xi.is_finite())) {
        return Err(LabError::invalid("eigenvalues", "eigenvalues must be nonnegative"));
    }
    let s2 = sigma * sigma;
    Ok(eigenvalues.iter().map(|&xi| xi * s2 / (xi + s2)).sum())
}

/// Uncentered second-moment matrix `(1/n)·XᵀX`, symmetrized.
pub fn empirical_covariance(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = rows.nrows();
    if n == 0 {
        return Err(LabError::invalid("rows", "need at least one row"));
    }
    let c = rows.transpose() * rows / n as f64;
    Ok((&c + c.transpose()) * 0.5)
}

fn resolve_tau_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    if !cfg.tau_grid.is_empty() {
        return cfg.tau_grid.clone();
    }
    let max_eps = cfg.eps_list.iter().cloned().fold(0.0f64, f64::max);
    default_tau_grid(1.0 + 4.0 * max_eps)
}

/// 64 log-spaced thresholds spanning [1, hi].
pub fn default_tau_grid(hi: f64) -> Vec<f64> {
    let points = 64;
    (0..points)
        .map(|i| hi.powf(i as f64 / (points - 1) as f64))
        .collect()
}

/// One replication's payload: exact MSE and optional test error.
type Payload = (f64, Option<f64>);

/// Run the replication body for every r, retrying rank-deficient draws
/// on later stream blocks. Returns the payloads in replication order
/// plus the number of redraws.
fn run_replications<F>(cfg: &ExperimentConfig, experiment: u32, body: F) -> Result<(Vec<Payload>, usize)>
where
    F: Fn(u64) -> Result<Payload> + Sync,
{
    let reps = cfg.replications;
    let one = |r: usize| -> Result<(Payload, usize)> {
        let mut attempt = 0;
        loop {
            let stream = experiment_stream(experiment, (attempt * reps + r) as u64);
            match body(stream) {
                Ok(payload) => return Ok((payload, attempt)),
                Err(LabError::RankDeficient { .. }) if attempt < MAX_RETRIES => attempt += 1,
                Err(e) => return Err(e),
            }
        }
    };
    let outcomes: Result<Vec<(Payload, usize)>> = if cfg.parallel_workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.parallel_workers)
            .build()
            .map_err(|e| LabError::invalid("parallel_workers", e.to_string()))?;
        pool.install(|| (0..reps).into_par_iter().map(one).collect())
    } else {
        (0..reps).map(one).collect()
    };
    let outcomes = outcomes?;
    let retries = outcomes.iter().map(|(_, a)| a).sum();
    Ok((outcomes.into_iter().map(|(p, _)| p).collect(), retries))
}

fn assemble_report(
    cfg: &ExperimentConfig,
    eps: f64,
    n: usize,
    sol: &LmmseSolution,
    payloads: Vec<Payload>,
    retries: usize,
    tau_grid: &[f64],
) -> Result<TailReport> {
    let mse_values: Vec<f64> = payloads.iter().map(|(mse, _)| *mse).collect();
    let test_values = if payloads.iter().all(|(_, t)| t.is_some()) {
        Some(payloads.iter().map(|(_, t)| t.unwrap()).collect())
    } else {
        None
    };
    let exceed_fractions = empirical_tail(&mse_values, sol.mse, tau_grid)?;
    let m = cfg.m;
    let reference_expected = sol.mse + expected_approx_error_gaussian(sol.mse, m, n)?;
    let gamma = m as f64 / n as f64;
    let reference_asymptotic = sol.mse + asymptotic_gaussian_limit(sol.mse, gamma)?;
    Ok(TailReport {
        eps,
        n,
        mse_values,
        test_values,
        tau_grid: tau_grid.to_vec(),
        exceed_fractions,
        reference_expected,
        reference_asymptotic,
        trace_cee: sol.mse,
        retries,
    })
}

/// The random model of the Gaussian campaign: Haar-basis covariances
/// with uniform spectra and a standard normal forward operator, drawn
/// from the campaign's reserved stream block.
pub fn gaussian_campaign_model(cfg: &ExperimentConfig) -> Result<LinearModel> {
    cfg.validate()?;
    let a = standard_normal_matrix(
        &mut SeedSpec::new(cfg.master_seed, experiment_stream(0, 0)).rng(),
        cfg.m,
        cfg.n_dim,
    );
    let cxx = spd_with(
        &mut SeedSpec::new(cfg.master_seed, experiment_stream(0, 1)).rng(),
        cfg.n_dim,
        SPD_EIG_FLOOR,
    );
    let czz = spd_with(
        &mut SeedSpec::new(cfg.master_seed, experiment_stream(0, 2)).rng(),
        cfg.m,
        SPD_EIG_FLOOR,
    );
    build_model(a, cxx, czz)
}

/// Tail campaign for the Gaussian model: per ε, n = n₀(M, ε) and
/// `replications` independent (sample, fit, exact MSE) runs.
pub fn run_gaussian_experiment(cfg: &ExperimentConfig) -> Result<Vec<TailReport>> {
    cfg.validate()?;
    let model = gaussian_campaign_model(cfg)?;
    let sol = solve_lmmse(&model)?;
    let tau_grid = resolve_tau_grid(cfg);
    let mut reports = Vec::with_capacity(cfg.eps_list.len());
    for (j, &eps) in cfg.eps_list.iter().enumerate() {
        let n = n_expected_gaussian(cfg.m, eps)? as usize;
        let (payloads, retries) = run_replications(cfg, (j + 1) as u32, |stream| {
            let seed = SeedSpec::new(cfg.master_seed, stream);
            let batch = sample_gaussian_pairs(&model, n, seed)?;
            let fit = fit_least_squares(&batch)?;
            let mse = mse_of_linear(&model, &sol, &fit.theta_hat)?;
            Ok((mse, None))
        })?;
        reports.push(assemble_report(cfg, eps, n, &sol, payloads, retries, &tau_grid)?);
    }
    Ok(reports)
}

/// Denoising campaign on a centered dataset: `A = I`, `Czz = σ²I`, and
/// `Cxx` is the empirical train covariance. Each replication draws `n`
/// training rows without replacement, adds fresh uniform noise, fits,
/// records the exact MSE under the empirical model, and evaluates the
/// fitted map on the (freshly noised) test set.
pub fn run_denoise_experiment(
    cfg: &ExperimentConfig,
    train: &ImageDataset,
    test: &ImageDataset,
) -> Result<Vec<TailReport>> {
    cfg.validate()?;
    if !train.centered || !test.centered {
        return Err(LabError::invalid("datasets", "train and test must be centered first"));
    }
    let dim = train.dim();
    if test.dim() != dim {
        return Err(LabError::dim(
            "run_denoise_experiment",
            format!("test dimension {dim}"),
            format!("{}", test.dim()),
        ));
    }
    if cfg.m != dim || cfg.n_dim != dim {
        return Err(LabError::dim(
            "run_denoise_experiment",
            format!("config M = N = {dim}"),
            format!("{}x{}", cfg.m, cfg.n_dim),
        ));
    }
    let cxx = empirical_covariance(&train.data)?;
    let czz = DMatrix::identity(dim, dim) * (cfg.sigma * cfg.sigma);
    let eye = DMatrix::identity(dim, dim);
    let model = match build_model(eye.clone(), cxx.clone(), czz.clone()) {
        Ok(model) => model,
        // Identically-flat pixels make the empirical prior singular but
        // harmless; a vanishing ridge restores definiteness without
        // moving trace(C_EE) at any reported precision.
        Err(LabError::NotPositiveDefinite { .. }) => {
            let ridge = 1e-12 * cxx.trace() / dim as f64;
            let mut fixed = cxx;
            for i in 0..dim {
                fixed[(i, i)] += ridge;
            }
            build_model(eye, fixed, czz)?
        }
        Err(e) => return Err(e),
    };
    let sol = solve_lmmse(&model)?;
    let tau_grid = resolve_tau_grid(cfg);
    let mut reports = Vec::with_capacity(cfg.eps_list.len());
    for (j, &eps) in cfg.eps_list.iter().enumerate() {
        let n = n_expected_gaussian(dim, eps)? as usize;
        if n > train.count() {
            return Err(LabError::InsufficientData {
                requested: n,
                available: train.count(),
            });
        }
        let (payloads, retries) = run_replications(cfg, (j + 1) as u32, |stream| {
            let seed = SeedSpec::new(cfg.master_seed, stream);
            let mut rng = seed.rng();
            // One sequential stream per replication: subset, train
            // noise, then test noise.
            let x = rows_without_replacement_with(&mut rng, train, n)?;
            let z = uniform_noise_with(&mut rng, dim, cfg.sigma, n);
            let y = &x + z;
            let fit = fit_least_squares(&SampleBatch { x, y, seed })?;
            let mse = mse_of_linear(&model, &sol, &fit.theta_hat)?;
            let z_test = uniform_noise_with(&mut rng, dim, cfg.sigma, test.count());
            let y_test = &test.data + z_test;
            let test_mse = test_error(
                &fit.theta_hat,
                &SampleBatch { x: test.data.clone(), y: y_test, seed },
            )?;
            Ok((mse, Some(test_mse)))
        })?;
        reports.push(assemble_report(cfg, eps, n, &sol, payloads, retries, &tau_grid)?);
    }
    Ok(reports)
}

/// Wishart trace summary over `replications` draws of an n×M standard
/// normal matrix 𝐙.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WishartSummary {
    pub m: usize,
    pub n: usize,
    pub replications: usize,
    /// Mean of `trace((𝐙ᵀ𝐙)⁻¹)`.
    pub mean_trace: f64,
    /// Sample standard deviation (zero for a single replication).
    pub sd: f64,
    /// `M/(n−M−1)`, the exact Wishart expectation.
    pub reference_wishart: f64,
    /// `M/n`, the isotropic lower bound on the expectation.
    pub reference_lower: f64,
}

pub fn wishart_trace_experiment(
    m: usize,
    n: usize,
    replications: usize,
    seed: u64,
) -> Result<WishartSummary> {
    if m == 0 {
        return Err(LabError::invalid("M", "need M >= 1"));
    }
    if n <= m + 1 {
        return Err(LabError::NTooSmall { n, m });
    }
    if replications == 0 {
        return Err(LabError::invalid("replications", "need at least one replication"));
    }
    let mut traces = Vec::with_capacity(replications);
    for r in 0..replications {
        let mut rng = SeedSpec::new(seed, experiment_stream(0, r as u64)).rng();
        let z = standard_normal_matrix(&mut rng, n, m);
        let gram = z.transpose() * &z;
        let chol = Cholesky::new(gram).ok_or(LabError::NumericalSingularity {
            context: "Cholesky of 𝐙ᵀ𝐙",
        })?;
        traces.push(chol.inverse().trace());
    }
    let mean_trace = traces.iter().sum::<f64>() / replications as f64;
    let sd = if replications > 1 {
        let ss: f64 = traces.iter().map(|&t| (t - mean_trace) * (t - mean_trace)).sum();
        (ss / (replications - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(WishartSummary {
        m,
        n,
        replications,
        mean_trace,
        sd,
        reference_wishart: m as f64 / (n - m - 1) as f64,
        reference_lower: m as f64 / n as f64,
    })
}
