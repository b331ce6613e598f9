//! Sub-Gaussian tail bound calculus.
//!
//! Each bound is a pure formula in precomputed statistics (traces,
//! operator norms, dimensions), decoupled from matrix code, so the
//! planner and the CLI can evaluate them directly. The probabilistic
//! content: each evaluator returns a threshold that the corresponding
//! random quantity exceeds with probability at most the stated level
//! (e⁻ᵗ for the quadratic-form family, 2e⁻ᵗ for singular values,
//! 3e⁻ᵗ + Ne⁻ˢ for the combined approximation-error bound).

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

/// Spectral summary of `GᵀG` for an injective design `G`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GramStats {
    /// `trace((GᵀG)⁻¹)`.
    pub trace_inv: f64,
    /// `trace((GᵀG)⁻²)`.
    pub trace_inv2: f64,
    /// `‖(GᵀG)⁻¹‖₂ = 1/λ_min`.
    pub norm_inv: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Hypotheses of the approximation-error theorem, bundled.
///
/// `c` is the companion covariance of the conditional error (whitened
/// errors are 1-sub-Gaussian), `mu` bounds `|E[E|Y]_i|` componentwise,
/// `rho` is the parameter of the whitened data, and `sigma`/`b` feed
/// the scalar lemmas.
#[derive(Debug, Clone, PartialEq)]
pub struct SubGaussianSpec {
    pub sigma: f64,
    pub rho: f64,
    pub c: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub b: f64,
}

impl SubGaussianSpec {
    pub fn new(sigma: f64, rho: f64, c: DMatrix<f64>, mu: DVector<f64>, b: f64) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("rho", rho), ("b", b)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(LabError::invalid(name, format!("must be nonnegative, got {v}")));
            }
        }
        if c.nrows() != c.ncols() {
            return Err(LabError::dim(
                "SubGaussianSpec",
                "square C",
                format!("{}x{}", c.nrows(), c.ncols()),
            ));
        }
        if mu.len() != c.nrows() {
            return Err(LabError::dim(
                "SubGaussianSpec",
                format!("mu of length {}", c.nrows()),
                format!("length {}", mu.len()),
            ));
        }
        if mu.iter().any(|&v| v < 0.0) {
            return Err(LabError::invalid("mu", "componentwise bounds must be nonnegative"));
        }
        let scale = c.norm();
        if (&c - c.transpose()).norm() > 1e-10 * scale.max(1.0) {
            return Err(LabError::NonSymmetric { name: "C", rel_asym: (&c - c.transpose()).norm() / scale });
        }
        let eigs = c.clone().symmetric_eigenvalues();
        if eigs.min() < -1e-10 * scale.max(1.0) {
            return Err(LabError::NotPositiveDefinite { name: "C" });
        }
        Ok(SubGaussianSpec { sigma, rho, c, mu, b })
    }

    /// `(trace(C), trace(C²), ‖C‖₂)`.
    pub fn companion_stats(&self) -> (f64, f64, f64) {
        let eigs = self.c.clone().symmetric_eigenvalues();
        (self.c.trace(), eigs.iter().map(|&l| l * l).sum(), eigs.max())
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(LabError::invalid(name, format!("must be nonnegative, got {v}")));
    }
    Ok(())
}

/// Bound on `‖HV‖²` for a σ-sub-Gaussian vector `V` and fixed `H`,
/// with `Σ = HᵀH` statistics: holds with probability ≥ 1−e⁻ᵗ.
pub fn quadratic_form_bound(
    trace_s: f64,
    trace_s2: f64,
    norm_s: f64,
    sigma: f64,
    mean_norm_sq: f64,
    t: f64,
) -> Result<f64> {
    for (name, v) in [
        ("trace_s", trace_s),
        ("trace_s2", trace_s2),
        ("norm_s", norm_s),
        ("sigma", sigma),
        ("mean_norm_sq", mean_norm_sq),
        ("t", t),
    ] {
        check_nonneg(name, v)?;
    }
    let centered = sigma * sigma * (trace_s + 2.0 * (trace_s2 * t).sqrt() + 2.0 * norm_s * t);
    let mean_term = if mean_norm_sq == 0.0 {
        0.0
    } else if t == 0.0 {
        mean_norm_sq
    } else if trace_s2 == 0.0 {
        return Err(LabError::DegenerateSigma);
    } else {
        mean_norm_sq * (1.0 + 2.0 * (norm_s * norm_s * t / trace_s2).sqrt())
    };
    Ok(centered + mean_term)
}

/// Bound on `(1/n)‖Σᵢ Vᵢ‖²` for i.i.d. centered σ-sub-Gaussian vectors
/// in R^M: `σ²(M + 2√(Mt) + 2t)`, probability ≥ 1−e⁻ᵗ.
pub fn sum_subgaussian_bound(m: usize, sigma: f64, t: f64) -> Result<f64> {
    check_nonneg("sigma", sigma)?;
    check_nonneg("t", t)?;
    let mf = m as f64;
    Ok(sigma * sigma * (mf + 2.0 * (mf * t).sqrt() + 2.0 * t))
}

/// Sub-Gaussian parameter of `V·W` when `V` is centered σ-sub-Gaussian
/// and `|W| ≤ b` with `E[VW] = 0`: `bσ√(3/2)`.
pub fn product_subgaussian_param(sigma: f64, b: f64) -> Result<f64> {
    check_nonneg("sigma", sigma)?;
    check_nonneg("b", b)?;
    Ok(b * sigma * 1.5f64.sqrt())
}

/// Bound for weighted sums `(1/n)‖Σᵢ wᵢVᵢ‖²` with `|wᵢ| ≤ b`:
/// the sum bound dilated by the product parameter, `(3/2)b²σ²(M+2√(Mt)+2t)`.
pub fn weighted_sum_bound(m: usize, sigma: f64, b: f64, t: f64) -> Result<f64> {
    check_nonneg("b", b)?;
    Ok(1.5 * b * b * sum_subgaussian_bound(m, sigma, t)?)
}

/// Bound on `‖H𝐄‖_F²` for a random matrix `𝐄` with independent rows
/// whose whitened versions are 1-sub-Gaussian with companion matrix C:
/// probability ≥ 1−e⁻ᵗ.
#[allow(clippy::too_many_arguments)]
pub fn matrix_quadratic_bound(
    trace_c: f64,
    trace_c2: f64,
    norm_c: f64,
    trace_s: f64,
    trace_s2: f64,
    norm_s: f64,
    mean_f_sq: f64,
    t: f64,
) -> Result<f64> {
    for (name, v) in [
        ("trace_c", trace_c),
        ("trace_c2", trace_c2),
        ("norm_c", norm_c),
        ("trace_s", trace_s),
        ("trace_s2", trace_s2),
        ("norm_s", norm_s),
        ("mean_f_sq", mean_f_sq),
        ("t", t),
    ] {
        check_nonneg(name, v)?;
    }
    let centered = trace_c * trace_s
        + 2.0 * (trace_c2 * trace_s2 * t).sqrt()
        + 2.0 * norm_c * norm_s * t;
    let mean_term = if mean_f_sq == 0.0 {
        0.0
    } else if t == 0.0 {
        mean_f_sq
    } else if trace_c2 * trace_s2 == 0.0 {
        return Err(LabError::DegenerateSigma);
    } else {
        mean_f_sq
            * (1.0 + 2.0 * (norm_c * norm_c * norm_s * norm_s * t / (trace_c2 * trace_s2)).sqrt())
    };
    Ok(centered + mean_term)
}

/// Spectral statistics of `GᵀG`; fails on non-injective `G`.
pub fn gram_stats(g: &DMatrix<f64>) -> Result<GramStats> {
    let m = g.ncols();
    let gram = g.transpose() * g;
    let threshold = 1e-12 * gram.trace() / m.max(1) as f64;
    let eigs = gram.symmetric_eigenvalues();
    let lambda_min = eigs.min();
    let lambda_max = eigs.max();
    if g.nrows() < m || !(lambda_min > threshold) {
        return Err(LabError::RankDeficient {
            gram_min_eig: lambda_min.max(0.0),
            threshold,
        });
    }
    Ok(GramStats {
        trace_inv: eigs.iter().map(|&l| 1.0 / l).sum(),
        trace_inv2: eigs.iter().map(|&l| 1.0 / (l * l)).sum(),
        norm_inv: 1.0 / lambda_min,
        lambda_min,
        lambda_max,
    })
}

/// Singular-value interval for an n×M matrix with independent isotropic
/// ρ-sub-Gaussian rows: `√n ∓ cρ²(√M + √t)`, probability ≥ 1−2e⁻ᵗ.
/// The lower endpoint can be negative; callers must check positivity.
pub fn singular_value_bounds(n: usize, m: usize, rho: f64, c_abs: f64, t: f64) -> Result<(f64, f64)> {
    check_nonneg("t", t)?;
    if !(rho > 0.0) || !(c_abs > 0.0) {
        return Err(LabError::invalid("rho", "need rho > 0 and c_abs > 0"));
    }
    let margin = c_abs * rho * rho * ((m as f64).sqrt() + t.sqrt());
    let root_n = (n as f64).sqrt();
    Ok((root_n - margin, root_n + margin))
}

/// Conditional approximation-error bounds given the design:
/// `ε_err^𝐘` and `ε_bias^𝐘`, jointly valid with probability ≥ 1−e⁻ᵗ
/// over the errors. `m` is the Gram dimension and cross-checks `stats`.
pub fn conditional_error_bounds(
    stats: &GramStats,
    m: usize,
    c_stats: (f64, f64, f64),
    mean_proj_f_sq: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let (trace_c, trace_c2, norm_c) = c_stats;
    for (name, v) in [
        ("trace_c", trace_c),
        ("trace_c2", trace_c2),
        ("norm_c", norm_c),
        ("mean_proj_f_sq", mean_proj_f_sq),
        ("t", t),
    ] {
        check_nonneg(name, v)?;
    }
    let mf = m as f64;
    let slack = 1.0 + 1e-9;
    let consistent = stats.trace_inv2 <= stats.norm_inv * stats.trace_inv * slack
        && mf / (stats.lambda_max * stats.lambda_max) <= stats.trace_inv2 * slack
        && stats.trace_inv2 <= mf / (stats.lambda_min * stats.lambda_min) * slack
        && (stats.norm_inv * stats.lambda_min - 1.0).abs() <= 1e-9;
    if m == 0 || !consistent {
        return Err(LabError::invalid(
            "stats",
            "Gram statistics are inconsistent with the stated dimension",
        ));
    }
    let eps_err = trace_c * stats.trace_inv
        + 2.0 * (trace_c2 * stats.trace_inv2 * t).sqrt()
        + 2.0 * norm_c * stats.norm_inv * t;
    let eps_bias = if mean_proj_f_sq == 0.0 {
        0.0
    } else if t == 0.0 {
        mean_proj_f_sq
    } else if trace_c2 == 0.0 {
        return Err(LabError::DegenerateSigma);
    } else {
        mean_proj_f_sq
            * (1.0
                + 2.0
                    * (norm_c * norm_c * stats.norm_inv * stats.norm_inv * t
                        / (trace_c2 * stats.trace_inv2))
                        .sqrt())
    };
    Ok((eps_err, eps_bias))
}

/// Unconditional approximation-error tail bound from explicit companion
/// statistics. `n_dim` is N (the length of μ), which enters only the
/// probability floor `1 − 3e⁻ᵗ − N e⁻ˢ`.
#[allow(clippy::too_many_arguments)]
pub fn approx_error_tail_bound_from_stats(
    trace_c: f64,
    trace_c2: f64,
    norm_c: f64,
    mu_norm_sq: f64,
    n_dim: usize,
    rho: f64,
    c_abs: f64,
    n: usize,
    m: usize,
    t: f64,
    s: f64,
) -> Result<(f64, f64, f64)> {
    for (name, v) in [
        ("trace_c", trace_c),
        ("trace_c2", trace_c2),
        ("norm_c", norm_c),
        ("mu_norm_sq", mu_norm_sq),
        ("t", t),
        ("s", s),
    ] {
        check_nonneg(name, v)?;
    }
    if !(rho > 0.0) || !(c_abs > 0.0) {
        return Err(LabError::invalid("rho", "need rho > 0 and c_abs > 0"));
    }
    let mf = m as f64;
    let nf = n as f64;
    let margin = c_abs * rho * rho * (mf.sqrt() + t.sqrt());
    let denom = nf.sqrt() - margin;
    if !(denom > 0.0) {
        return Err(LabError::DenominatorNonpositive { value: denom });
    }
    let eps_err = (trace_c * mf + 2.0 * (mf * trace_c2 * t).sqrt() + 2.0 * norm_c * t)
        / (denom * denom);
    let eps_bias = if mu_norm_sq == 0.0 {
        0.0
    } else {
        let correction = if t == 0.0 {
            1.0
        } else if trace_c2 == 0.0 {
            return Err(LabError::DegenerateSigma);
        } else {
            let ratio = (nf.sqrt() + margin) / denom;
            1.0 + 2.0 * t.sqrt() * norm_c / (mf * trace_c2).sqrt() * ratio * ratio
        };
        1.5 * rho * rho * mu_norm_sq * nf * (mf + 2.0 * (mf * s).sqrt() + 2.0 * s)
            / denom.powi(4)
            * correction
    };
    let prob_floor = 1.0 - 3.0 * (-t).exp() - n_dim as f64 * (-s).exp();
    Ok((eps_err, eps_bias, prob_floor))
}

/// Theorem-level wrapper: derive the companion statistics from the spec.
pub fn approx_error_tail_bound(
    spec: &SubGaussianSpec,
    c_abs: f64,
    n: usize,
    m: usize,
    t: f64,
    s: f64,
) -> Result<(f64, f64, f64)> {
    let (trace_c, trace_c2, norm_c) = spec.companion_stats();
    approx_error_tail_bound_from_stats(
        trace_c,
        trace_c2,
        norm_c,
        spec.mu.norm_squared(),
        spec.c.nrows(),
        spec.rho,
        c_abs,
        n,
        m,
        t,
        s,
    )
}

/// Sub-Gaussian parameter of a uniform variable on `[a,b]`: `(b−a)/√12`.
pub fn subgaussian_param_uniform(a: f64, b: f64) -> Result<f64> {
    if !(a <= b) {
        return Err(LabError::invalid("a", format!("need a <= b, got a={a} b={b}")));
    }
    Ok((b - a) / 12f64.sqrt())
}

/// Sub-Gaussian parameter of any variable supported on `[a,b]`: `(b−a)/2`.
pub fn subgaussian_param_bounded(a: f64, b: f64) -> Result<f64> {
    if !(a <= b) {
        return Err(LabError::invalid("a", format!("need a <= b, got a={a} b={b}")));
    }
    Ok((b - a) / 2.0)
}
