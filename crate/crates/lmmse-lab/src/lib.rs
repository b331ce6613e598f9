//! Linear minimum mean squared error (LMMSE) estimation for the model
//! `Y = AX + Z`, together with the machinery needed to study how many
//! samples a plug-in least-squares estimator needs before it competes
//! with the optimal linear map:
//!
//! * [`model`]: exact posterior quantities (`Θ*`, error covariance, MSE)
//!   and the Tikhonov view of the same solve.
//! * [`sampling`]: seeded, stream-indexed generators for Gaussian pairs,
//!   Haar-orthogonal matrices, random SPD covariances, and whitening.
//! * [`least_squares`]: the empirical estimator `Θ̂ = argmin ‖YΘ − X‖_F`
//!   fitted by orthogonal factorization.
//! * [`planner`]: closed-form sample-size rules `n₀`, `n₁`, `n₂` and the
//!   expected/asymptotic excess-risk formulas they come from.
//! * [`tail_bounds`]: sub-Gaussian quadratic-form and singular-value
//!   bounds, plus the conditional and unconditional excess-MSE tails.
//! * [`experiments`]: reproducible Monte Carlo campaigns (random Gaussian
//!   models, image denoising, Wishart traces) with tail reports.
//! * [`dataset_io`]: IDX image loading, centering, subsampling, and a
//!   synthetic image-like dataset.
//!
//! All randomness flows through [`sampling::SeedSpec`]; campaigns assign
//! one stream per replication so parallel and serial runs agree bitwise.

pub mod dataset_io;
pub mod error;
pub mod experiments;
pub mod least_squares;
pub mod matio;
pub mod model;
pub mod planner;
pub mod sampling;
pub mod tail_bounds;

pub use dataset_io::ImageDataset;
pub use error::{LabError, Result};
pub use experiments::{ExperimentConfig, TailReport, WishartSummary};
pub use least_squares::FittedEstimator;
pub use model::{LinearModel, LmmseSolution};
pub use sampling::{SampleBatch, SeedSpec};
pub use tail_bounds::{GramStats, SubGaussianSpec};
