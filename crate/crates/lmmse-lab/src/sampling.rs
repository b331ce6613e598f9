//! Seeded generators: Gaussian sample batches, Haar-orthogonal matrices,
//! random SPD covariances, uniform noise, and whitened designs.
//!
//! Every generator is a pure function of its inputs and a [`SeedSpec`].
//! A `SeedSpec` names one ChaCha stream out of 2⁶⁴ per master seed, so
//! replications can run in parallel without sharing RNG state and still
//! reproduce the serial run bit for bit.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::model::{LinearModel, LmmseSolution};

/// Deterministic name for one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            master_seed,
            stream_index,
        }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Stream layout for campaigns: replication `r` (or any other item) of
/// experiment `e` lives at stream `e·2³² + r`.
pub fn experiment_stream(experiment: u32, item: u64) -> u64 {
    debug_assert!(item < 1 << 32, "stream item index overflows its block");
    ((experiment as u64) << 32) + item
}

/// Paired parameter/data samples, one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// n×N parameter samples.
    pub x: DMatrix<f64>,
    /// n×M data samples.
    pub y: DMatrix<f64>,
    pub seed: SeedSpec,
}

impl SampleBatch {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }
}

/// n×k matrix of standard normals, drawn row-major.
pub(crate) fn standard_normal_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(n, k);
    for i in 0..n {
        for j in 0..k {
            out[(i, j)] = rng.sample(StandardNormal);
        }
    }
    out
}

pub(crate) fn gaussian_pairs_with(
    rng: &mut ChaCha8Rng,
    model: &LinearModel,
    n: usize,
    seed: SeedSpec,
) -> Result<SampleBatch> {
    let lx = crate::model::cholesky_with_jitter("Cxx", &model.cxx)?.unpack();
    let lz = crate::model::cholesky_with_jitter("Czz", &model.czz)?.unpack();
    // Rows xᵢ = L_x ξᵢ, so X = Ξ L_xᵀ; likewise for the noise.
    let x = standard_normal_matrix(rng, n, model.n()) * lx.transpose();
    let z = standard_normal_matrix(rng, n, model.m()) * lz.transpose();
    let y = &x * model.a.transpose() + z;
    Ok(SampleBatch { x, y, seed })
}

/// Draw `n` independent pairs `(xᵢ, yᵢ = A xᵢ + zᵢ)` from the model.
pub fn sample_gaussian_pairs(model: &LinearModel, n: usize, seed: SeedSpec) -> Result<SampleBatch> {
    if n == 0 {
        return Err(LabError::invalid("n", "need at least one sample"));
    }
    let mut rng = seed.rng();
    gaussian_pairs_with(&mut rng, model, n, seed)
}

pub(crate) fn orthogonal_with(rng: &mut ChaCha8Rng, k: usize) -> DMatrix<f64> {
    let g = standard_normal_matrix(rng, k, k);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    // Fixing the signs of diag(R) makes the QR map Haar-distributed.
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            for i in 0..k {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// Haar-distributed k×k orthogonal matrix.
pub fn random_orthogonal(k: usize, seed: SeedSpec) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(LabError::invalid("k", "need k >= 1"));
    }
    Ok(orthogonal_with(&mut seed.rng(), k))
}

pub(crate) fn spd_with(rng: &mut ChaCha8Rng, k: usize, eig_floor: f64) -> DMatrix<f64> {
    let p = orthogonal_with(rng, k);
    let lambda = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            rng.random_range(eig_floor..1.0)
        } else {
            0.0
        }
    });
    let c = &p * lambda * p.transpose();
    (&c + c.transpose()) * 0.5
}

/// Random SPD matrix `P Λ Pᵀ` with Haar `P` and eigenvalues uniform on
/// `[eig_floor, 1)`. A floor of 1e-6 keeps the matrix safely invertible.
pub fn random_spd_covariance(k: usize, seed: SeedSpec, eig_floor: f64) -> Result<DMatrix<f64>> {
    if k == 0 {
        return Err(LabError::invalid("k", "need k >= 1"));
    }
    if !(0.0..1.0).contains(&eig_floor) {
        return Err(LabError::invalid(
            "eig_floor",
            format!("need 0 <= eig_floor < 1, got {eig_floor}"),
        ));
    }
    Ok(spd_with(&mut seed.rng(), k, eig_floor))
}

pub(crate) fn uniform_noise_with(
    rng: &mut ChaCha8Rng,
    m: usize,
    sigma: f64,
    n: usize,
) -> DMatrix<f64> {
    let b = sigma * 3.0f64.sqrt();
    let mut out = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            out[(i, j)] = rng.random_range(-b..b);
        }
    }
    out
}

/// n×M matrix of i.i.d. noise uniform on `[−σ√3, σ√3]`, hence variance σ².
pub fn sample_uniform_noise(m: usize, sigma: f64, n: usize, seed: SeedSpec) -> Result<DMatrix<f64>> {
    if !(sigma > 0.0) {
        return Err(LabError::invalid("sigma", format!("need sigma > 0, got {sigma}")));
    }
    if m == 0 || n == 0 {
        return Err(LabError::invalid("n", "need m >= 1 and n >= 1"));
    }
    Ok(uniform_noise_with(&mut seed.rng(), m, sigma, n))
}

/// Symmetric inverse square root from the eigendecomposition.
pub(crate) fn inverse_sqrt_symmetric(c: &DMatrix<f64>, context: &'static str) -> Result<DMatrix<f64>> {
    let se = SymmetricEigen::new(c.clone());
    if se.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(LabError::NumericalSingularity { context });
    }
    let inv_sqrt = se.eigenvalues.map(|l| 1.0 / l.sqrt());
    Ok(&se.eigenvectors * DMatrix::from_diagonal(&inv_sqrt) * se.eigenvectors.transpose())
}

/// Whitened design `Z = Y C_YY^{−1/2}`; its rows are isotropic.
pub fn whitened_design(sol: &LmmseSolution, batch: &SampleBatch) -> Result<DMatrix<f64>> {
    let m = sol.cyy.nrows();
    if batch.y.ncols() != m {
        return Err(LabError::dim(
            "whitened_design",
            format!("Y with {m} columns"),
            format!("{} columns", batch.y.ncols()),
        ));
    }
    let w = inverse_sqrt_symmetric(&sol.cyy, "inverse square root of C_YY")?;
    Ok(&batch.y * w)
}

/// Lower Cholesky factor of an SPD matrix, with the shared jitter policy.
pub fn spd_cholesky_factor(name: &'static str, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(crate::model::cholesky_with_jitter(name, c)?.unpack())
}

#[allow(unused)]
fn _assert_cholesky_is_lower(c: Cholesky<f64, nalgebra::Dyn>) -> DMatrix<f64> {
    c.unpack()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, solve_lmmse};
    use approx::assert_relative_eq;

    fn scalar_model() -> LinearModel {
        build_model(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn batches_are_bitwise_reproducible() {
        let model = scalar_model();
        let seed = SeedSpec::new(42, 3);
        let a = sample_gaussian_pairs(&model, 1, seed).unwrap();
        let b = sample_gaussian_pairs(&model, 1, seed).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn distinct_streams_differ() {
        let model = scalar_model();
        let a = sample_gaussian_pairs(&model, 4, SeedSpec::new(42, 0)).unwrap();
        let b = sample_gaussian_pairs(&model, 4, SeedSpec::new(42, 1)).unwrap();
        assert_ne!(a.x, b.x);
    }

    #[test]
    fn scalar_sample_variance_matches_prior() {
        let model = scalar_model();
        let batch = sample_gaussian_pairs(&model, 100_000, SeedSpec::new(7, 0)).unwrap();
        let var = batch.x.column(0).map(|v| v * v).sum() / batch.n() as f64;
        assert!((var - 1.0).abs() < 0.02, "sample variance {var}");
    }

    #[test]
    fn data_covariance_matches_cyy() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.25, 1.5]);
        let cxx = random_spd_covariance(2, SeedSpec::new(5, 1), 0.1).unwrap();
        let czz = random_spd_covariance(2, SeedSpec::new(5, 2), 0.1).unwrap();
        let model = build_model(a, cxx, czz).unwrap();
        let sol = solve_lmmse(&model).unwrap();
        let n = 100_000;
        let batch = sample_gaussian_pairs(&model, n, SeedSpec::new(9, 0)).unwrap();
        let emp = batch.y.transpose() * &batch.y / n as f64;
        let rel = (&emp - &sol.cyy).norm() / sol.cyy.norm();
        assert!(rel < 0.03, "relative Frobenius gap {rel}");
    }

    #[test]
    fn orthogonal_1x1_is_sign() {
        for s in 0..8 {
            let q = random_orthogonal(1, SeedSpec::new(s, 0)).unwrap();
            assert_relative_eq!(q[(0, 0)].abs(), 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn orthogonality_residual_is_tiny() {
        let q = random_orthogonal(8, SeedSpec::new(11, 4)).unwrap();
        let resid = (q.transpose() * &q - DMatrix::identity(8, 8)).norm();
        assert!(resid < 1e-10, "residual {resid}");
    }

    #[test]
    fn haar_first_entry_is_centered() {
        let mut sum = 0.0;
        let draws = 10_000;
        for s in 0..draws {
            let q = random_orthogonal(50, SeedSpec::new(123, s)).unwrap();
            sum += q[(0, 0)];
        }
        let mean = sum / draws as f64;
        assert!(mean.abs() < 0.05, "mean of Q11 {mean}");
    }

    #[test]
    fn spd_scalar_is_in_range() {
        let c = random_spd_covariance(1, SeedSpec::new(3, 0), 1e-6).unwrap();
        assert!(c[(0, 0)] >= 1e-6 && c[(0, 0)] <= 1.0);
    }

    #[test]
    fn spd_eigenvalues_respect_floor() {
        let floor = 1e-3;
        let c = random_spd_covariance(16, SeedSpec::new(21, 0), floor).unwrap();
        let eigs = c.symmetric_eigenvalues();
        for &l in eigs.iter() {
            assert!(l >= floor - 1e-10 && l <= 1.0 + 1e-10, "eigenvalue {l}");
        }
    }

    #[test]
    fn spd_seeds_are_distinct() {
        let a = random_spd_covariance(16, SeedSpec::new(1, 0), 1e-6).unwrap();
        let b = random_spd_covariance(16, SeedSpec::new(2, 0), 1e-6).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn uniform_noise_stays_in_band() {
        let sigma = 0.1;
        let bound = sigma * 3.0f64.sqrt();
        let z = sample_uniform_noise(10, sigma, 100, SeedSpec::new(4, 0)).unwrap();
        assert!(z.iter().all(|&v| (-bound..=bound).contains(&v)));
    }

    #[test]
    fn uniform_noise_variance_matches_sigma_squared() {
        let sigma = 0.1;
        let z = sample_uniform_noise(1000, sigma, 1000, SeedSpec::new(8, 0)).unwrap();
        let var = z.iter().map(|v| v * v).sum::<f64>() / (z.nrows() * z.ncols()) as f64;
        assert!((var - sigma * sigma).abs() < 0.01 * sigma * sigma, "variance {var}");
    }

    #[test]
    fn zero_sigma_is_rejected() {
        assert!(matches!(
            sample_uniform_noise(2, 0.0, 2, SeedSpec::new(0, 0)),
            Err(LabError::InvalidParameter { name: "sigma", .. })
        ));
    }

    #[test]
    fn whitening_with_identity_cyy_is_identity_map() {
        // A = 0 forces C_YY = Czz = I.
        let model = build_model(DMatrix::zeros(2, 2), DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let sol = solve_lmmse(&model).unwrap();
        let batch = sample_gaussian_pairs(&model, 16, SeedSpec::new(6, 0)).unwrap();
        let z = whitened_design(&sol, &batch).unwrap();
        assert_relative_eq!(z, batch.y, max_relative = 1e-12);
    }

    #[test]
    fn scalar_whitening_divides_by_sqrt_two() {
        let model = scalar_model();
        let sol = solve_lmmse(&model).unwrap();
        let batch = sample_gaussian_pairs(&model, 8, SeedSpec::new(13, 0)).unwrap();
        let z = whitened_design(&sol, &batch).unwrap();
        assert_relative_eq!(z, batch.y.clone() / 2.0f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn whitened_rows_are_isotropic() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 0.8]);
        let cxx = random_spd_covariance(2, SeedSpec::new(14, 1), 0.1).unwrap();
        let czz = random_spd_covariance(2, SeedSpec::new(14, 2), 0.1).unwrap();
        let model = build_model(a, cxx, czz).unwrap();
        let sol = solve_lmmse(&model).unwrap();
        let n = 100_000;
        let batch = sample_gaussian_pairs(&model, n, SeedSpec::new(15, 0)).unwrap();
        let z = whitened_design(&sol, &batch).unwrap();
        let emp = z.transpose() * &z / n as f64;
        let rel = (&emp - DMatrix::identity(2, 2)).norm() / 2.0f64.sqrt();
        assert!(rel < 0.03, "relative Frobenius gap {rel}");
    }

    #[test]
    fn experiment_streams_do_not_collide() {
        assert_eq!(experiment_stream(0, 5), 5);
        assert_eq!(experiment_stream(1, 0), 1 << 32);
        assert_eq!(experiment_stream(2, 3), (2u64 << 32) + 3);
    }
}
