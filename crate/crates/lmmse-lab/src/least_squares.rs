//! Plain least squares fit of a linear estimator from a sample batch.
//!
//! `Θ̂ = argmin_Θ (1/n)‖𝐘Θ − 𝐗‖_F²` has the closed form `(𝐘ᵀ𝐘)⁻¹𝐘ᵀ𝐗`;
//! the fit goes through a QR factorization of `𝐘` instead, which avoids
//! squaring the condition number when n is close to M.

use nalgebra::DMatrix;

use crate::error::{LabError, Result};
use crate::model::LmmseSolution;
use crate::sampling::{SampleBatch, SeedSpec};

/// Least squares estimator with its rank diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedEstimator {
    /// `Θ̂`, M×N.
    pub theta_hat: DMatrix<f64>,
    /// Number of training samples.
    pub n: usize,
    /// Smallest eigenvalue of `𝐘ᵀ𝐘`.
    pub gram_min_eig: f64,
    pub seed: SeedSpec,
}

/// Fit `Θ̂` by QR; refuses designs that fail the injectivity check
/// `λ_min(𝐘ᵀ𝐘) > 1e-12·trace(𝐘ᵀ𝐘)/M`.
pub fn fit_least_squares(batch: &SampleBatch) -> Result<FittedEstimator> {
    let n = batch.n();
    let m = batch.y.ncols();
    let trace_gram = batch.y.norm_squared();
    let threshold = 1e-12 * trace_gram / m as f64;
    if n < m {
        return Err(LabError::RankDeficient {
            gram_min_eig: 0.0,
            threshold,
        });
    }
    let qr = batch.y.clone().qr();
    let r = qr.r();
    // Singular values of R are those of Y, so λ_min(YᵀY) = σ_min(R)².
    let sv = r.singular_values();
    let sigma_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let gram_min_eig = sigma_min * sigma_min;
    if !(gram_min_eig > threshold) {
        return Err(LabError::RankDeficient {
            gram_min_eig,
            threshold,
        });
    }
    let mut qtx = batch.x.clone();
    qr.q_tr_mul(&mut qtx);
    let rhs = qtx.rows(0, m).into_owned();
    let theta_hat = r
        .solve_upper_triangular(&rhs)
        .ok_or(LabError::NumericalSingularity {
            context: "triangular solve in the least squares fit",
        })?;
    Ok(FittedEstimator {
        theta_hat,
        n,
        gram_min_eig,
        seed: batch.seed,
    })
}

/// `(1/n)‖𝐘Θ − 𝐗‖_F²` on the given batch.
pub fn empirical_mse(theta: &DMatrix<f64>, batch: &SampleBatch) -> Result<f64> {
    if theta.nrows() != batch.y.ncols() || theta.ncols() != batch.x.ncols() {
        return Err(LabError::dim(
            "empirical_mse",
            format!("{}x{}", batch.y.ncols(), batch.x.ncols()),
            format!("{}x{}", theta.nrows(), theta.ncols()),
        ));
    }
    let resid = &batch.y * theta - &batch.x;
    Ok(resid.norm_squared() / batch.n() as f64)
}

/// Held-out error `(1/n_test) Σᵢ ‖Θᵀ yᵢ − xᵢ‖²`; same formula as
/// [`empirical_mse`], evaluated on a batch the estimator never saw.
pub fn test_error(theta: &DMatrix<f64>, test_batch: &SampleBatch) -> Result<f64> {
    empirical_mse(theta, test_batch)
}

/// Per-sample estimation errors of the optimal estimator: `𝐄 = 𝐗 − 𝐘Θ*`.
pub fn estimation_error_samples(batch: &SampleBatch, sol: &LmmseSolution) -> Result<DMatrix<f64>> {
    let (m, n_dim) = (sol.theta_star.nrows(), sol.theta_star.ncols());
    if batch.y.ncols() != m || batch.x.ncols() != n_dim {
        return Err(LabError::dim(
            "estimation_error_samples",
            format!("batch with Y:{m} and X:{n_dim} columns"),
            format!("Y:{} X:{}", batch.y.ncols(), batch.x.ncols()),
        ));
    }
    Ok(&batch.x - &batch.y * &sol.theta_star)
}

/// `Θ̂ − Θ*`, which equals `(𝐘ᵀ𝐘)⁻¹𝐘ᵀ𝐄` on the training batch.
pub fn estimator_difference(fit: &FittedEstimator, sol: &LmmseSolution) -> DMatrix<f64> {
    &fit.theta_hat - &sol.theta_star
}
