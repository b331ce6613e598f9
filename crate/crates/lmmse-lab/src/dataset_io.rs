//! Image datasets for the denoising experiment: IDX-ubyte loading,
//! centering, seeded subsampling, and a synthetic stand-in that needs no
//! files on disk.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::sampling::{orthogonal_with, standard_normal_matrix, SeedSpec};

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// A stack of flattened images, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    /// count×N, pixel values in [0,1] before centering.
    pub data: DMatrix<f64>,
    /// The vector subtracted from every row (zeros when uncentered).
    pub mean_vector: DVector<f64>,
    pub centered: bool,
    pub source: String,
}

impl ImageDataset {
    pub fn count(&self) -> usize {
        self.data.nrows()
    }

    /// Pixels per image.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    /// Split into a leading block of `n_head` rows and the remainder,
    /// both inheriting the centering state.
    pub fn split_at(&self, n_head: usize) -> Result<(ImageDataset, ImageDataset)> {
        if n_head == 0 || n_head >= self.count() {
            return Err(LabError::InsufficientData {
                requested: n_head,
                available: self.count(),
            });
        }
        let head = ImageDataset {
            data: self.data.rows(0, n_head).into_owned(),
            mean_vector: self.mean_vector.clone(),
            centered: self.centered,
            source: format!("{}[..{}]", self.source, n_head),
        };
        let tail = ImageDataset {
            data: self.data.rows(n_head, self.count() - n_head).into_owned(),
            mean_vector: self.mean_vector.clone(),
            centered: self.centered,
            source: format!("{}[{}..]", self.source, n_head),
        };
        Ok((head, tail))
    }
}

/// Parse an IDX-ubyte image file: big-endian magic 0x00000803, then
/// count, rows, cols as 32-bit integers, then the pixel bytes. Pixels
/// map to [0,1] via p/255.
pub fn load_idx_images(path: &Path) -> Result<ImageDataset> {
    let bytes = std::fs::read(path)?;
    parse_idx_images(&bytes, &path.display().to_string())
}

fn parse_idx_images(bytes: &[u8], source: &str) -> Result<ImageDataset> {
    if bytes.len() < 16 {
        return Err(LabError::TruncatedFile {
            expected: 16,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_be_bytes(bytes[4 * i..4 * i + 4].try_into().unwrap());
    let magic = word(0);
    if magic != IDX_IMAGE_MAGIC {
        return Err(LabError::BadMagic {
            expected: IDX_IMAGE_MAGIC,
            found: magic,
        });
    }
    let count = word(1) as usize;
    let rows = word(2) as usize;
    let cols = word(3) as usize;
    let pixels = (count as u128) * (rows as u128) * (cols as u128);
    let expected = 16u128 + pixels;
    if (bytes.len() as u128) < expected {
        return Err(LabError::TruncatedFile {
            expected: expected.min(usize::MAX as u128) as usize,
            found: bytes.len(),
        });
    }
    let n_dim = rows * cols;
    let data = DMatrix::from_row_iterator(
        count,
        n_dim,
        bytes[16..16 + pixels as usize].iter().map(|&p| p as f64 / 255.0),
    );
    Ok(ImageDataset {
        data,
        mean_vector: DVector::zeros(n_dim),
        centered: false,
        source: source.to_string(),
    })
}

fn column_means(data: &DMatrix<f64>) -> DVector<f64> {
    let n = data.nrows().max(1) as f64;
    DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.sum() / n))
}

/// Subtract the column means, recording them in `mean_vector`.
pub fn center_dataset(ds: &ImageDataset) -> ImageDataset {
    let mean = column_means(&ds.data);
    let mut data = ds.data.clone();
    for mut row in data.row_iter_mut() {
        row -= mean.transpose();
    }
    ImageDataset {
        data,
        mean_vector: mean,
        centered: true,
        source: ds.source.clone(),
    }
}

/// Subtract a fixed mean (the training mean, for test sets).
pub fn center_with_mean(ds: &ImageDataset, mean: &DVector<f64>) -> Result<ImageDataset> {
    if mean.len() != ds.dim() {
        return Err(LabError::dim(
            "center_with_mean",
            format!("mean of length {}", ds.dim()),
            format!("length {}", mean.len()),
        ));
    }
    let mut data = ds.data.clone();
    for mut row in data.row_iter_mut() {
        row -= mean.transpose();
    }
    Ok(ImageDataset {
        data,
        mean_vector: mean.clone(),
        centered: true,
        source: ds.source.clone(),
    })
}

/// Partial Fisher–Yates: the first `n` entries of a virtual shuffle.
pub(crate) fn sample_indices_with(rng: &mut ChaCha8Rng, count: usize, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..count).collect();
    for i in 0..n {
        let j = rng.random_range(i..count);
        idx.swap(i, j);
    }
    idx.truncate(n);
    idx
}

/// `n` distinct rows drawn uniformly without replacement.
pub fn sample_without_replacement(
    ds: &ImageDataset,
    n: usize,
    seed: SeedSpec,
) -> Result<DMatrix<f64>> {
    let mut rng = seed.rng();
    rows_without_replacement_with(&mut rng, ds, n)
}

pub(crate) fn rows_without_replacement_with(
    rng: &mut ChaCha8Rng,
    ds: &ImageDataset,
    n: usize,
) -> Result<DMatrix<f64>> {
    if n == 0 || n > ds.count() {
        return Err(LabError::InsufficientData {
            requested: n,
            available: ds.count(),
        });
    }
    let idx = sample_indices_with(rng, ds.count(), n);
    let mut out = DMatrix::zeros(n, ds.dim());
    for (i, &row) in idx.iter().enumerate() {
        out.set_row(i, &ds.data.row(row));
    }
    Ok(out)
}

/// Gaussian image-like dataset with covariance `P diag(1/k²) Pᵀ` for a
/// Haar-random basis `P`; rows are clamped to a finite range and the
/// empirical mean is subtracted, so the result arrives centered.
pub fn synthetic_image_dataset(n_dim: usize, count: usize, seed: SeedSpec) -> Result<ImageDataset> {
    if n_dim == 0 || count == 0 {
        return Err(LabError::invalid("n_dim", "need n_dim >= 1 and count >= 1"));
    }
    let mut rng = seed.rng();
    let basis = orthogonal_with(&mut rng, n_dim);
    // X = Ξ diag(1/k) Pᵀ gives rows with covariance P diag(1/k²) Pᵀ.
    let mut xi = standard_normal_matrix(&mut rng, count, n_dim);
    for k in 0..n_dim {
        let scale = 1.0 / ((k + 1) * (k + 1)) as f64;
        xi.column_mut(k).scale_mut(scale.sqrt());
    }
    let mut data = xi * basis.transpose();
    data.apply(|v| *v = v.clamp(-1e12, 1e12));
    let raw = ImageDataset {
        data,
        mean_vector: DVector::zeros(n_dim),
        centered: false,
        source: format!("synthetic({n_dim}x{count})"),
    };
    Ok(center_dataset(&raw))
}
