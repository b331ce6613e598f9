//! Linear inverse problem `Y = AX + Z` and its optimal linear estimator.
//!
//! For zero-mean `X` with covariance `Cxx` and independent zero-mean
//! noise `Z` with covariance `Czz`, the linear map minimizing
//! `E‖ΘᵀY − X‖²` is `Θ*ᵀ = (Aᵀ Czz⁻¹ A + Cxx⁻¹)⁻¹ Aᵀ Czz⁻¹`, with error
//! covariance `C_EE = Cxx − Cxx Aᵀ C_YY⁻¹ A Cxx` and `C_YY = A Cxx Aᵀ + Czz`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{LabError, Result};

/// Forward operator plus prior and noise covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub cxx: DMatrix<f64>,
    pub czz: DMatrix<f64>,
}

impl LinearModel {
    /// Data dimension M (rows of A).
    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    /// Parameter dimension N (columns of A).
    pub fn n(&self) -> usize {
        self.a.ncols()
    }
}

/// Optimal linear estimator `Θ*` together with its error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct LmmseSolution {
    /// `Θ*`, M×N; the estimate of `x` from `y` is `Θ*ᵀ y`.
    pub theta_star: DMatrix<f64>,
    /// Error covariance `C_EE`, N×N, symmetrized.
    pub cee: DMatrix<f64>,
    /// `trace(cee)`, the MSE of `Θ*`.
    pub mse: f64,
    /// Data covariance `C_YY = A Cxx Aᵀ + Czz`, M×M.
    pub cyy: DMatrix<f64>,
    /// Relative Frobenius gap between the two closed forms of `C_EE`.
    pub form_gap: f64,
}

pub(crate) const TOL_SYM: f64 = 1e-10;

fn check_symmetric(name: &'static str, c: &DMatrix<f64>) -> Result<()> {
    let asym = (c - c.transpose()).norm();
    let scale = c.norm();
    let rel = if scale > 0.0 { asym / scale } else { asym };
    if rel > TOL_SYM {
        return Err(LabError::NonSymmetric {
            name,
            rel_asym: rel,
        });
    }
    Ok(())
}

/// Cholesky with one jitter retry (1e-12·trace/dim on the diagonal).
pub(crate) fn cholesky_with_jitter(
    name: &'static str,
    c: &DMatrix<f64>,
) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(c.clone()) {
        return Ok(chol);
    }
    let dim = c.nrows().max(1) as f64;
    let jitter = 1e-12 * c.trace() / dim;
    let mut jittered = c.clone();
    for i in 0..c.nrows() {
        jittered[(i, i)] += jitter;
    }
    Cholesky::new(jittered).ok_or(LabError::NotPositiveDefinite { name })
}

/// Validate dimensions, symmetry, and positive definiteness.
pub fn build_model(a: DMatrix<f64>, cxx: DMatrix<f64>, czz: DMatrix<f64>) -> Result<LinearModel> {
    let (m, n) = (a.nrows(), a.ncols());
    if m == 0 || n == 0 {
        return Err(LabError::dim("build_model", "nonzero M and N", format!("{m}x{n}")));
    }
    if cxx.nrows() != n || cxx.ncols() != n {
        return Err(LabError::dim(
            "build_model: Cxx",
            format!("{n}x{n}"),
            format!("{}x{}", cxx.nrows(), cxx.ncols()),
        ));
    }
    if czz.nrows() != m || czz.ncols() != m {
        return Err(LabError::dim(
            "build_model: Czz",
            format!("{m}x{m}"),
            format!("{}x{}", czz.nrows(), czz.ncols()),
        ));
    }
    check_symmetric("Cxx", &cxx)?;
    check_symmetric("Czz", &czz)?;
    // Validation is strict: a zero eigenvalue is rejected here even
    // though the interior solve paths would tolerate it via jitter.
    Cholesky::new(cxx.clone()).ok_or(LabError::NotPositiveDefinite { name: "Cxx" })?;
    Cholesky::new(czz.clone()).ok_or(LabError::NotPositiveDefinite { name: "Czz" })?;
    Ok(LinearModel { a, cxx, czz })
}

/// Compute `Θ*`, `C_EE` (by both closed forms), its trace, and `C_YY`.
///
/// The stored `cee` comes from the gain form `Cxx − Cxx Aᵀ C_YY⁻¹ A Cxx`,
/// which never inverts `Cxx`; the information form `(AᵀCzz⁻¹A + Cxx⁻¹)⁻¹`
/// is evaluated only to report `form_gap`.
pub fn solve_lmmse(model: &LinearModel) -> Result<LmmseSolution> {
    let a = &model.a;
    let cyy = a * &model.cxx * a.transpose() + &model.czz;
    let chol_cyy = Cholesky::new(cyy.clone())
        .ok_or(LabError::NumericalSingularity { context: "Cholesky of C_YY" })?;

    // K = A Cxx is M×N; Θ* = C_YY⁻¹ K and C_EE = Cxx − Kᵀ C_YY⁻¹ K.
    let k = a * &model.cxx;
    let theta_star = chol_cyy.solve(&k);
    let gain = k.transpose() * &theta_star;
    let mut cee = &model.cxx - gain;
    cee = (&cee + cee.transpose()) * 0.5;
    let mse = cee.trace();

    // Information form, for the cross-form diagnostic only.
    let chol_czz = cholesky_with_jitter("Czz", &model.czz)
        .map_err(|_| LabError::NumericalSingularity { context: "Cholesky of Czz" })?;
    let chol_cxx = cholesky_with_jitter("Cxx", &model.cxx)
        .map_err(|_| LabError::NumericalSingularity { context: "Cholesky of Cxx" })?;
    let s = a.transpose() * chol_czz.solve(a) + chol_cxx.inverse();
    let cee_info = Cholesky::new(s)
        .ok_or(LabError::NumericalSingularity { context: "Cholesky of the information matrix" })?
        .inverse();
    let scale = cee.norm();
    let form_gap = if scale > 0.0 {
        (&cee - cee_info).norm() / scale
    } else {
        (&cee - cee_info).norm()
    };

    Ok(LmmseSolution {
        theta_star,
        cee,
        mse,
        cyy,
        form_gap,
    })
}

fn check_theta_dims(context: &'static str, sol: &LmmseSolution, theta: &DMatrix<f64>) -> Result<()> {
    let (m, n) = (sol.theta_star.nrows(), sol.theta_star.ncols());
    if theta.nrows() != m || theta.ncols() != n {
        return Err(LabError::dim(
            context,
            format!("{m}x{n}"),
            format!("{}x{}", theta.nrows(), theta.ncols()),
        ));
    }
    Ok(())
}

/// Excess MSE of `Θ` over the optimum: `trace((Θ−Θ*)ᵀ C_YY (Θ−Θ*))`.
///
/// Evaluated as `‖Lᵀ(Θ−Θ*)‖_F²` with `C_YY = L Lᵀ`, so the result is
/// nonnegative by construction.
pub fn approximation_error(sol: &LmmseSolution, theta: &DMatrix<f64>) -> Result<f64> {
    check_theta_dims("approximation_error", sol, theta)?;
    let chol = Cholesky::new(sol.cyy.clone())
        .ok_or(LabError::NumericalSingularity { context: "Cholesky of C_YY" })?;
    let delta = theta - &sol.theta_star;
    Ok(excess_via_factor(chol.l().transpose(), &delta))
}

pub(crate) fn excess_via_factor(l_t: DMatrix<f64>, delta: &DMatrix<f64>) -> f64 {
    (l_t * delta).norm_squared()
}

/// Exact MSE of an arbitrary linear estimator: `trace(C_EE)` plus the
/// approximation error of `Θ`.
pub fn mse_of_linear(model: &LinearModel, sol: &LmmseSolution, theta: &DMatrix<f64>) -> Result<f64> {
    if theta.nrows() != model.m() || theta.ncols() != model.n() {
        return Err(LabError::dim(
            "mse_of_linear",
            format!("{}x{}", model.m(), model.n()),
            format!("{}x{}", theta.nrows(), theta.ncols()),
        ));
    }
    Ok(sol.mse + approximation_error(sol, theta)?)
}

/// Solve the weighted Tikhonov problem
/// `min_x ‖Ax−y‖²_{Czz⁻¹} + ‖x‖²_{Cxx⁻¹}` via its normal equations
/// `(AᵀCzz⁻¹A + Cxx⁻¹) x = AᵀCzz⁻¹ y`. Equals `Θ*ᵀ y`.
pub fn tikhonov_estimate(model: &LinearModel, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != model.m() {
        return Err(LabError::dim(
            "tikhonov_estimate",
            format!("vector of length {}", model.m()),
            format!("length {}", y.len()),
        ));
    }
    let chol_czz = cholesky_with_jitter("Czz", &model.czz)
        .map_err(|_| LabError::NumericalSingularity { context: "Cholesky of Czz" })?;
    let chol_cxx = cholesky_with_jitter("Cxx", &model.cxx)
        .map_err(|_| LabError::NumericalSingularity { context: "Cholesky of Cxx" })?;
    let a = &model.a;
    let s = a.transpose() * chol_czz.solve(a) + chol_cxx.inverse();
    let rhs = a.transpose() * chol_czz.solve(y);
    let chol_s = Cholesky::new(s)
        .ok_or(LabError::NumericalSingularity { context: "Cholesky of the normal equations" })?;
    Ok(chol_s.solve(&rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{random_spd_covariance, SeedSpec};
    use approx::assert_relative_eq;
    use rand::Rng as _;

    fn scalar_model() -> LinearModel {
        build_model(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    pub(crate) fn random_model(m: usize, n: usize, seed: u64) -> LinearModel {
        let mut rng = SeedSpec::new(seed, 0).rng();
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
        let cxx = random_spd_covariance(n, SeedSpec::new(seed, 1), 1e-3).unwrap();
        let czz = random_spd_covariance(m, SeedSpec::new(seed, 2), 1e-3).unwrap();
        build_model(a, cxx, czz).unwrap()
    }

    #[test]
    fn identity_model_is_valid() {
        let model = build_model(
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        );
        assert!(model.is_ok());
    }

    #[test]
    fn singular_prior_is_rejected() {
        let err = build_model(
            DMatrix::identity(2, 2),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
            DMatrix::identity(2, 2),
        )
        .unwrap_err();
        assert!(matches!(err, LabError::NotPositiveDefinite { name: "Cxx" }));
    }

    #[test]
    fn asymmetric_covariance_is_rejected() {
        let mut cxx = DMatrix::identity(2, 2);
        cxx[(0, 1)] = 0.5;
        let err = build_model(DMatrix::identity(2, 2), cxx, DMatrix::identity(2, 2)).unwrap_err();
        assert!(matches!(err, LabError::NonSymmetric { name: "Cxx", .. }));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let err = build_model(
            DMatrix::identity(3, 2),
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
        )
        .unwrap_err();
        assert!(matches!(err, LabError::DimensionMismatch { .. }));
    }

    #[test]
    fn random_rectangular_model_builds() {
        let model = random_model(3, 2, 7);
        assert_eq!(model.m(), 3);
        assert_eq!(model.n(), 2);
    }

    #[test]
    fn scalar_solution_matches_hand_values() {
        let sol = solve_lmmse(&scalar_model()).unwrap();
        assert_relative_eq!(sol.theta_star[(0, 0)], 0.5, max_relative = 1e-14);
        assert_relative_eq!(sol.cee[(0, 0)], 0.5, max_relative = 1e-14);
        assert_relative_eq!(sol.mse, 0.5, max_relative = 1e-14);
        assert_relative_eq!(sol.cyy[(0, 0)], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_operator_gives_prior_back() {
        let cxx = random_spd_covariance(3, SeedSpec::new(5, 1), 1e-3).unwrap();
        let model = build_model(DMatrix::zeros(2, 3), cxx.clone(), DMatrix::identity(2, 2)).unwrap();
        let sol = solve_lmmse(&model).unwrap();
        assert!(sol.theta_star.norm() < 1e-14);
        assert_relative_eq!(sol.cee, cxx, max_relative = 1e-12);
        assert_relative_eq!(sol.mse, cxx.trace(), max_relative = 1e-12);
    }

    #[test]
    fn dual_cee_forms_agree() {
        for seed in 0..20 {
            let model = random_model(3, 2, 100 + seed);
            let sol = solve_lmmse(&model).unwrap();
            assert!(sol.form_gap < 1e-8, "form gap {} at seed {seed}", sol.form_gap);
        }
    }

    #[test]
    fn cee_is_symmetric_psd_and_below_prior() {
        let model = random_model(4, 3, 11);
        let sol = solve_lmmse(&model).unwrap();
        assert_eq!(sol.cee, sol.cee.transpose());
        let eigs = sol.cee.clone().symmetric_eigenvalues();
        assert!(eigs.iter().all(|&l| l >= -1e-12 * sol.cee.norm()));
        let slack = (&model.cxx - &sol.cee).symmetric_eigenvalues();
        let bound = 1e-8 * model.cxx.clone().symmetric_eigenvalues().max();
        assert!(slack.iter().all(|&l| l >= -bound));
        assert!(sol.mse > 0.0 && sol.mse <= model.cxx.trace() + 1e-12);
    }

    #[test]
    fn mse_of_theta_star_is_trace_cee() {
        let model = random_model(3, 2, 21);
        let sol = solve_lmmse(&model).unwrap();
        let v = mse_of_linear(&model, &sol, &sol.theta_star.clone()).unwrap();
        assert_relative_eq!(v, sol.mse, max_relative = 1e-12);
        assert_eq!(approximation_error(&sol, &sol.theta_star.clone()).unwrap(), 0.0);
    }

    #[test]
    fn mse_of_zero_estimator_is_prior_trace() {
        for seed in 0..10 {
            let model = random_model(4, 3, 300 + seed);
            let sol = solve_lmmse(&model).unwrap();
            let zero = DMatrix::zeros(model.m(), model.n());
            let v = mse_of_linear(&model, &sol, &zero).unwrap();
            assert_relative_eq!(v, model.cxx.trace(), max_relative = 1e-10);
        }
    }

    #[test]
    fn scalar_mse_and_approx_error_hand_values() {
        let model = scalar_model();
        let sol = solve_lmmse(&model).unwrap();
        let one = DMatrix::from_element(1, 1, 1.0);
        assert_relative_eq!(mse_of_linear(&model, &sol, &one).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(approximation_error(&sol, &one).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn approx_error_is_bracketed_by_cyy_eigenvalues() {
        let model = random_model(3, 2, 33);
        let sol = solve_lmmse(&model).unwrap();
        let mut rng = SeedSpec::new(33, 9).rng();
        let eps = 0.37;
        let mut delta = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0));
        delta *= eps / delta.norm();
        let theta = &sol.theta_star + &delta;
        let v = approximation_error(&sol, &theta).unwrap();
        let eigs = sol.cyy.clone().symmetric_eigenvalues();
        let (lo, hi) = (eigs.min(), eigs.max());
        assert!(v >= eps * eps * lo * (1.0 - 1e-10));
        assert!(v <= eps * eps * hi * (1.0 + 1e-10));
    }

    #[test]
    fn perturbations_never_beat_theta_star() {
        let model = random_model(3, 2, 44);
        let sol = solve_lmmse(&model).unwrap();
        let mut rng = SeedSpec::new(44, 9).rng();
        for _ in 0..100 {
            let delta = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-1.0..1.0)) * 0.1;
            let theta = &sol.theta_star + delta;
            let v = mse_of_linear(&model, &sol, &theta).unwrap();
            assert!(v >= sol.mse - 1e-12);
        }
    }

    #[test]
    fn tikhonov_zero_data_gives_zero() {
        let model = random_model(3, 2, 55);
        let x = tikhonov_estimate(&model, &DVector::zeros(3)).unwrap();
        assert!(x.norm() < 1e-14);
    }

    #[test]
    fn tikhonov_scalar_hand_value() {
        let x = tikhonov_estimate(&scalar_model(), &DVector::from_vec(vec![2.0])).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn tikhonov_matches_theta_star_action() {
        for seed in 0..10 {
            let model = random_model(4, 3, 400 + seed);
            let sol = solve_lmmse(&model).unwrap();
            let mut rng = SeedSpec::new(seed, 7).rng();
            let y = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
            let x = tikhonov_estimate(&model, &y).unwrap();
            let reference = sol.theta_star.transpose() * &y;
            assert!((x.clone() - &reference).norm() <= 1e-8 * reference.norm().max(1e-30));
        }
    }

    #[test]
    fn theta_star_matches_information_formula() {
        let model = random_model(4, 3, 66);
        let sol = solve_lmmse(&model).unwrap();
        let chol_czz = Cholesky::new(model.czz.clone()).unwrap();
        let chol_cxx = Cholesky::new(model.cxx.clone()).unwrap();
        let s = model.a.transpose() * chol_czz.solve(&model.a) + chol_cxx.inverse();
        let theta_t = Cholesky::new(s).unwrap().solve(&(model.a.transpose() * chol_czz.solve(&DMatrix::identity(4, 4))));
        assert_relative_eq!(sol.theta_star.transpose(), theta_t, max_relative = 1e-8);
    }

    #[test]
    fn trace_identity_for_zero_estimator() {
        let model = random_model(3, 3, 77);
        let sol = solve_lmmse(&model).unwrap();
        let lhs = (sol.theta_star.transpose() * &sol.cyy * &sol.theta_star).trace();
        assert_relative_eq!(lhs, model.cxx.trace() - sol.mse, max_relative = 1e-10);
    }
}
