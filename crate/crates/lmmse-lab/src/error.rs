//! Error type shared by every module in the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

/// Everything that can go wrong, from bad arguments to singular solves.
#[derive(Debug, Error)]
pub enum LabError {
    /// Matrix expected to be symmetric is not, beyond tolerance.
    #[error("{name} is not symmetric (relative asymmetry {rel_asym:.3e})")]
    NonSymmetric { name: &'static str, rel_asym: f64 },

    /// Cholesky failed even after one jitter retry.
    #[error("{name} is not positive definite")]
    NotPositiveDefinite { name: &'static str },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },

    /// A factorization or inverse square root hit a non-positive eigenvalue.
    #[error("numerical singularity in {context}")]
    NumericalSingularity { context: &'static str },

    /// Design matrix fails the injectivity check.
    #[error("rank-deficient design: min eigenvalue of the Gram matrix {gram_min_eig:.3e} <= threshold {threshold:.3e}")]
    RankDeficient { gram_min_eig: f64, threshold: f64 },

    /// Sample size too small for the requested formula (needs n > m + 1).
    #[error("n = {n} is too small for m = {m}; the expected-error formula needs n > m + 1")]
    NTooSmall { n: usize, m: usize },

    #[error("gamma = {gamma} is outside (0, 1)")]
    DegenerateGamma { gamma: f64 },

    #[error("gamma = {gamma} is at or beyond the divergence point {limit}")]
    GammaOutOfRange { gamma: f64, limit: f64 },

    /// trace(Σ²) = 0 while a mean term needs to divide by it.
    #[error("degenerate sigma statistics: trace(Sigma^2) = 0 with a nonzero mean term")]
    DegenerateSigma,

    #[error("nonpositive denominator {value:.3e}; the bound is vacuous here")]
    DenominatorNonpositive { value: f64 },

    #[error("requested {requested} samples but only {available} are available")]
    InsufficientData { requested: usize, available: usize },

    /// IDX file header does not announce unsigned-byte image data.
    #[error("bad IDX magic: expected 0x{expected:08x}, found 0x{found:08x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated file: expected {expected} bytes of payload, found {found}")]
    TruncatedFile { expected: usize, found: usize },

    #[error("invalid value for {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("failed to parse {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    pub fn dim(context: &'static str, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        LabError::DimensionMismatch {
            context,
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}
