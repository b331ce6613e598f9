//! Sample-size rules and excess-error formulas.
//!
//! The central question: how many samples n does the least squares plug-in
//! need before its MSE is within a factor 1+ε of the optimum? For the
//! Gaussian model the expected excess is exactly `trace(C_EE)·M/(n−M−1)`,
//! which gives `n₀ = ⌈M/ε⌉ + M + 1`. The tail versions `n₁`, `n₂`, and the
//! trace-form / general bounds come from sub-Gaussian concentration and
//! hold with probability 1−δ.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

use crate::error::{LabError, Result};

/// Inputs shared by the tail planners.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PlanInputs {
    /// Data dimension M.
    pub m: usize,
    /// Relative excess tolerance ε.
    pub eps: f64,
    /// Failure probability δ.
    pub delta: f64,
    /// Eigenvalue ratio ν = ‖C_EE‖₂/trace(C_EE).
    pub nu: f64,
    /// Sub-Gaussian parameter ρ of the whitened data.
    pub rho: f64,
    /// Absolute constant of the singular-value bound. Only c = 1 (the
    /// Gaussian case) is backed by theory; other values are a knob.
    pub c_abs: f64,
}

impl PlanInputs {
    pub fn validate(&self) -> Result<()> {
        check_m(self.m)?;
        check_eps(self.eps)?;
        check_delta(self.delta)?;
        check_nu(self.nu)?;
        check_positive("rho", self.rho)?;
        check_positive("c_abs", self.c_abs)?;
        Ok(())
    }
}

fn check_m(m: usize) -> Result<()> {
    if m == 0 {
        return Err(LabError::invalid("M", "need M >= 1"));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(LabError::invalid("eps", format!("need eps > 0, got {eps}")));
    }
    Ok(())
}

// The planners only need ln(3/δ) > 0, so any δ < 3 is accepted; above 1
// the probability guarantee is vacuous but the formulas stay defined.
fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 3.0) {
        return Err(LabError::invalid(
            "delta",
            format!("need delta in (0,3), got {delta}"),
        ));
    }
    Ok(())
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(LabError::invalid("nu", format!("need nu in (0,1], got {nu}")));
    }
    Ok(())
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(LabError::invalid(name, format!("need a positive value, got {v}")));
    }
    Ok(())
}

fn log3delta(delta: f64) -> f64 {
    (3.0 / delta).ln()
}

/// `⌈M/ε⌉ + M + 1`: the least n whose expected relative excess in the
/// Gaussian model is at most ε. The ceiling is exact: ε is treated as
/// the rational its floating-point value denotes.
pub fn n_expected_gaussian(m: usize, eps: f64) -> Result<u64> {
    check_m(m)?;
    check_eps(eps)?;
    let eps_rat = BigRational::from_float(eps)
        .ok_or_else(|| LabError::invalid("eps", "not a finite number"))?;
    let quotient = BigRational::from_integer(BigInt::from(m)) / eps_rat;
    let ceiling = quotient.ceil().to_integer();
    if ceiling.is_negative() {
        return Err(LabError::invalid("eps", "ceiling underflow"));
    }
    ceiling
        .to_u64()
        .and_then(|c| c.checked_add(m as u64 + 1))
        .ok_or_else(|| LabError::invalid("eps", "sample count overflows u64"))
}

/// Round a real-valued planner output up to a usable sample count.
pub fn as_sample_count(n: f64) -> Result<u64> {
    if !(n.is_finite() && n >= 0.0) {
        return Err(LabError::invalid("n", format!("not a usable sample count: {n}")));
    }
    let c = n.ceil();
    if c > u64::MAX as f64 {
        return Err(LabError::invalid("n", "sample count overflows u64"));
    }
    Ok(c as u64)
}

/// `n₁(M,ε,δ,ν) = (√((M + 2√(Mν·ln(3/δ)) + 2ν·ln(3/δ))/ε) + √M + √ln(3/δ))²`.
pub fn n_tail_gaussian(m: usize, eps: f64, delta: f64, nu: f64) -> Result<f64> {
    check_m(m)?;
    check_eps(eps)?;
    check_delta(delta)?;
    check_nu(nu)?;
    let mf = m as f64;
    let l = log3delta(delta);
    let inner = (mf + 2.0 * (mf * nu * l).sqrt() + 2.0 * nu * l) / eps;
    let root = inner.sqrt() + mf.sqrt() + l.sqrt();
    Ok(root * root)
}

/// `n₂(M,ε,δ) = (M + 2√(M·ln(3/δ)) + 2·ln(3/δ))·(1/ε + 2/√ε + 1)`,
/// the ν-free relaxation of n₁; always ≥ n₁.
pub fn n_tail_gaussian_simplified(m: usize, eps: f64, delta: f64) -> Result<f64> {
    check_m(m)?;
    check_eps(eps)?;
    check_delta(delta)?;
    let mf = m as f64;
    let l = log3delta(delta);
    Ok((mf + 2.0 * (mf * l).sqrt() + 2.0 * l) * (1.0 / eps + 2.0 / eps.sqrt() + 1.0))
}

/// Spectral statistics of a symmetric PSD matrix: (trace, trace of the
/// square, operator norm).
fn psd_stats(name: &'static str, c: &DMatrix<f64>) -> Result<(f64, f64, f64)> {
    if c.nrows() != c.ncols() {
        return Err(LabError::dim(
            "psd_stats",
            "square matrix",
            format!("{}x{}", c.nrows(), c.ncols()),
        ));
    }
    let scale = c.norm();
    let asym = (c - c.transpose()).norm();
    if asym > 1e-10 * scale.max(1.0) {
        return Err(LabError::NonSymmetric {
            name,
            rel_asym: asym / scale.max(f64::MIN_POSITIVE),
        });
    }
    let eigs = c.clone().symmetric_eigenvalues();
    let min = eigs.min();
    if min < -1e-10 * scale.max(1.0) {
        return Err(LabError::NotPositiveDefinite { name });
    }
    let trace = c.trace();
    let trace2 = eigs.iter().map(|&l| l * l).sum();
    let norm = eigs.max();
    Ok((trace, trace2, norm))
}

/// Trace-form Gaussian tail bound from an explicit error covariance.
/// The matrix dimension plays the role of M (square model).
pub fn n_tail_gaussian_exact(cee: &DMatrix<f64>, eps: f64, delta: f64) -> Result<f64> {
    check_eps(eps)?;
    check_delta(delta)?;
    let (trace, trace2, norm) = psd_stats("Cee", cee)?;
    if !(trace > 0.0) {
        return Err(LabError::invalid("Cee", "zero trace"));
    }
    let mf = cee.nrows() as f64;
    let l = log3delta(delta);
    let inner = (trace * mf + 2.0 * (mf * trace2 * l).sqrt() + 2.0 * norm * l) / (trace * eps);
    let root = inner.sqrt() + mf.sqrt() + l.sqrt();
    Ok(root * root)
}

/// General sub-Gaussian tail bound with companion matrix C:
/// `(√((trace(C)M + 2√(M·trace(C²)·ln(3/δ)) + 2‖C‖₂·ln(3/δ))/(trace_cee·ε))
///   + cρ²(√M + √ln(3/δ)))²`. With C = C_EE and ρ = c = 1 this is the
/// trace-form Gaussian bound.
pub fn n_tail_general(
    c: &DMatrix<f64>,
    trace_cee: f64,
    m: usize,
    eps: f64,
    delta: f64,
    rho: f64,
    c_abs: f64,
) -> Result<f64> {
    check_m(m)?;
    check_eps(eps)?;
    check_delta(delta)?;
    check_positive("trace_cee", trace_cee)?;
    check_positive("rho", rho)?;
    check_positive("c_abs", c_abs)?;
    let (trace, trace2, norm) = psd_stats("C", c)?;
    let mf = m as f64;
    let l = log3delta(delta);
    let inner = (trace * mf + 2.0 * (mf * trace2 * l).sqrt() + 2.0 * norm * l) / (trace_cee * eps);
    let root = inner.sqrt() + c_abs * rho * rho * (mf.sqrt() + l.sqrt());
    Ok(root * root)
}

/// Exact expected excess for the Gaussian model:
/// `trace(C_EE)·M/(n−M−1)`; the expectation is infinite for n ≤ M+1.
pub fn expected_approx_error_gaussian(trace_cee: f64, m: usize, n: usize) -> Result<f64> {
    check_m(m)?;
    check_positive("trace_cee", trace_cee)?;
    if n <= m + 1 {
        return Err(LabError::NTooSmall { n, m });
    }
    Ok(trace_cee * m as f64 / (n - m - 1) as f64)
}

/// `E trace((𝐙ᵀ𝐙)⁻¹) ≥ M/n`, valid for any isotropic rows.
pub fn trace_lower_bound(m: usize, n: usize) -> Result<f64> {
    check_m(m)?;
    if n == 0 {
        return Err(LabError::invalid("n", "need n >= 1"));
    }
    Ok(m as f64 / n as f64)
}

/// Limiting relative excess when M/n → γ: `trace(C_EE)·γ/(1−γ)`.
pub fn asymptotic_gaussian_limit(trace_cee: f64, gamma: f64) -> Result<f64> {
    check_positive("trace_cee", trace_cee)?;
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(LabError::DegenerateGamma { gamma });
    }
    Ok(trace_cee * gamma / (1.0 - gamma))
}

/// Asymptotic tail bounds for aspect ratio γ:
/// `ε_err^γ = trace(C)·γ/(1−cρ²√γ)²` and
/// `ε_bias^γ = (3/2)ρ²‖μ‖₂²·γ/(1−cρ²√γ)⁴`, finite for γ < 1/(c²ρ⁴).
/// The stats must be mutually consistent: `‖C‖₂² ≤ trace(C²) ≤ ‖C‖₂·trace(C)`.
#[allow(clippy::too_many_arguments)]
pub fn asymptotic_error_bound(
    trace_c: f64,
    trace_c2: f64,
    norm_c: f64,
    mu_norm_sq: f64,
    rho: f64,
    c_abs: f64,
    gamma: f64,
) -> Result<(f64, f64)> {
    check_positive("trace_c", trace_c)?;
    check_positive("trace_c2", trace_c2)?;
    check_positive("norm_c", norm_c)?;
    check_positive("rho", rho)?;
    check_positive("c_abs", c_abs)?;
    if mu_norm_sq < 0.0 {
        return Err(LabError::invalid("mu_norm_sq", "must be nonnegative"));
    }
    let slack = 1.0 + 1e-9;
    if norm_c * norm_c > trace_c2 * slack || trace_c2 > norm_c * trace_c * slack {
        return Err(LabError::invalid(
            "trace_c2",
            "inconsistent PSD statistics: need norm² <= trace(C²) <= norm·trace",
        ));
    }
    let limit = 1.0 / (c_abs * c_abs * rho.powi(4));
    if !(gamma > 0.0 && gamma < limit) {
        return Err(LabError::GammaOutOfRange { gamma, limit });
    }
    let denom = 1.0 - c_abs * rho * rho * gamma.sqrt();
    let eps_err = trace_c * gamma / (denom * denom);
    let eps_bias = 1.5 * rho * rho * mu_norm_sq * gamma / denom.powi(4);
    Ok((eps_err, eps_bias))
}
