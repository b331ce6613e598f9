//! Command-line front door: planning, bound evaluation, exact LMMSE
//! solves, and the Monte Carlo campaigns, all with machine-readable
//! output and a metadata sidecar per invocation.
//!
//! Exit codes: 0 success, 2 validation failure (including bad flags),
//! 3 numerical failure, 4 I/O failure.

mod commands;
mod out;

use clap::Parser;
use lmmse_lab::LabError;

fn main() {
    let cli = commands::Cli::parse();
    if let Err(err) = commands::dispatch(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &LabError) -> i32 {
    match err {
        LabError::NonSymmetric { .. }
        | LabError::NotPositiveDefinite { .. }
        | LabError::DimensionMismatch { .. }
        | LabError::InvalidParameter { .. }
        | LabError::NTooSmall { .. }
        | LabError::DegenerateGamma { .. }
        | LabError::GammaOutOfRange { .. }
        | LabError::InsufficientData { .. }
        | LabError::DegenerateSigma
        | LabError::DenominatorNonpositive { .. } => 2,
        LabError::NumericalSingularity { .. } | LabError::RankDeficient { .. } => 3,
        LabError::Io(_)
        | LabError::BadMagic { .. }
        | LabError::TruncatedFile { .. }
        | LabError::Parse { .. } => 4,
    }
}
