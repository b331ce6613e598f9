//! Output plumbing: result files under `--out`, plus one metadata
//! sidecar per invocation echoing the resolved configuration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lmmse_lab::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Collects written files so the sidecar can list them.
pub struct OutCtx {
    dir: PathBuf,
    pub format: Format,
    started: Instant,
    files: Vec<String>,
}

impl OutCtx {
    pub fn new(dir: &Path, format: Format) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(OutCtx {
            dir: dir.to_path_buf(),
            format,
            started: Instant::now(),
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_text(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.path(name);
        std::fs::write(&path, content)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut body = serde_json::to_string_pretty(value).map_err(io_like)?;
        body.push('\n');
        self.write_text(name, &body)
    }

    /// Record a file written by other means (e.g. the matrix writer).
    pub fn note_file(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    /// The sidecar is always JSON, whatever `--format` says; wall time
    /// is informational and excluded from reproducibility comparisons.
    pub fn sidecar<T: Serialize>(self, name: &str, subcommand: &str, config: &T) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a, T> {
            subcommand: &'a str,
            version: &'a str,
            config: &'a T,
            outputs: &'a [String],
            wall_time_secs: f64,
        }
        let doc = Sidecar {
            subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config,
            outputs: &self.files,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
        };
        let mut body = serde_json::to_string_pretty(&doc).map_err(io_like)?;
        body.push('\n');
        std::fs::write(self.path(name), body)?;
        Ok(())
    }
}

fn io_like(err: serde_json::Error) -> lmmse_lab::LabError {
    lmmse_lab::LabError::Io(std::io::Error::other(err))
}

/// Full-precision float for CSV cells; round-trips the f64 exactly.
pub fn csv_f64(v: f64) -> String {
    format!("{v:.16e}")
}
