//! Plain-text and JSON matrix serialization.
//!
//! The text format is a header line `rows cols` followed by row-major
//! whitespace-separated values printed with 17 significant digits, which
//! is enough for an exact f64 round trip.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Row-major matrix payload used inside JSON documents.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixDoc {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixDoc {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        MatrixDoc {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(LabError::dim(
                "matrix document",
                format!("{} values", self.rows * self.cols),
                format!("{} values", self.data.len()),
            ));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut out = Vec::with_capacity(m.nrows() * (m.ncols() * 25 + 1) + 16);
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(b' ');
            }
            write!(out, "{:.16e}", m[(i, j)])?;
        }
        out.push(b'\n');
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let parse_err = |message: String| LabError::Parse {
        path: path.display().to_string(),
        message,
    };
    let mut tokens = text.split_whitespace();
    let mut header = |name: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| parse_err(format!("missing {name} in header")))?
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad {name}: {e}")))
    };
    let rows = header("row count")?;
    let cols = header("column count")?;
    let mut data = Vec::with_capacity(rows * cols);
    for tok in tokens {
        let v: f64 = tok
            .parse()
            .map_err(|e| parse_err(format!("bad value {tok:?}: {e}")))?;
        data.push(v);
    }
    if data.len() != rows * cols {
        return Err(parse_err(format!(
            "expected {} values, found {}",
            rows * cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.mat");
        let m = DMatrix::from_row_slice(
            2,
            3,
            &[1.0, -0.1, 1e-300, std::f64::consts::PI, -2.5e17, 3.0f64.sqrt()],
        );
        write_matrix(&path, &m).unwrap();
        let back = read_matrix(&path).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn header_mismatch_is_an_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.mat");
        fs::write(&path, "2 2\n1.0 2.0 3.0\n").unwrap();
        assert!(matches!(read_matrix(&path), Err(LabError::Parse { .. })));
    }

    #[test]
    fn json_doc_round_trip() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 0.2, 0.3, 0.4]);
        let doc = MatrixDoc::from_matrix(&m);
        let text = serde_json::to_string(&doc).unwrap();
        let back: MatrixDoc = serde_json::from_str(&text).unwrap();
        assert_eq!(back.to_matrix().unwrap(), m);
    }

    proptest! {
        #[test]
        fn round_trip_arbitrary(values in proptest::collection::vec(-1e12f64..1e12, 6)) {
            let dir = tempdir().unwrap();
            let path = dir.path().join("p.mat");
            let m = DMatrix::from_row_slice(3, 2, &values);
            write_matrix(&path, &m).unwrap();
            prop_assert_eq!(read_matrix(&path).unwrap(), m);
        }
    }
}
