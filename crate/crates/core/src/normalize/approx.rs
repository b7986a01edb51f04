//! Approximate ranking against a small set of seed rows.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, read_matrix, write_json, write_matrix, MatrixFormat};
use crate::matrix::{FeatureMatrix, Matrix};
use crate::par;

/// Per-dimension sorted seed values.
///
/// Seeds are whole rows of the fitting matrix; after fitting each dimension's
/// values are sorted independently, so rows of [`RankReference::to_matrix`]
/// are no longer original samples.
#[derive(Debug, Clone, PartialEq)]
pub struct RankReference {
    s: usize,
    dims: usize,
    /// Column-major: `dims` runs of `s` ascending values.
    seeds: Vec<f64>,
    rng_seed: Option<u64>,
}

/// JSON stored next to the binary seed matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSidecar {
    pub s: usize,
    pub dims: usize,
    pub seed: Option<u64>,
}

impl RankReference {
    /// Builds from an `S × D` matrix; each column is sorted ascending.
    pub fn from_matrix(seeds: &Matrix, rng_seed: Option<u64>) -> RankReference {
        let (s, dims) = seeds.shape();
        let mut cols = seeds.to_column_major();
        for c in cols.chunks_exact_mut(s) {
            c.sort_by(f64::total_cmp);
        }
        RankReference { s, dims, seeds: cols, rng_seed }
    }

    pub fn seed_count(&self) -> usize {
        self.s
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn rng_seed(&self) -> Option<u64> {
        self.rng_seed
    }

    /// Sorted seed values of dimension `d`.
    pub fn seeds(&self, d: usize) -> &[f64] {
        &self.seeds[d * self.s..(d + 1) * self.s]
    }

    /// `S × D` matrix whose column `d` is [`seeds(d)`](Self::seeds).
    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_column_major(self.s, self.dims, &self.seeds)
    }

    pub fn sidecar(&self) -> ReferenceSidecar {
        ReferenceSidecar { s: self.s, dims: self.dims, seed: self.rng_seed }
    }

    /// Fraction of seeds in dimension `d` strictly below `z`.
    #[inline]
    pub fn approx_rank(&self, d: usize, z: f64) -> f64 {
        let seeds = self.seeds(d);
        seeds.partition_point(|&s| s < z) as f64 / self.s as f64
    }
}

/// Picks `s` distinct rows uniformly without replacement and keeps their
/// per-dimension values sorted.
pub fn fit_rank_reference(m: &FeatureMatrix, s: usize, rng_seed: u64) -> Result<RankReference> {
    if s == 0 || s > m.rows() {
        return Err(Error::InvalidParameter(format!(
            "seed count S must lie in [1, {}], got {s}",
            m.rows()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rows = rand::seq::index::sample(&mut rng, m.rows(), s).into_vec();
    // Seed values are sorted per dimension anyway; canonical row order keeps the
    // intermediate matrix reproducible too.
    rows.sort_unstable();
    let picked = m.select_rows(&rows)?;
    Ok(RankReference::from_matrix(&picked, Some(rng_seed)))
}

/// Replaces each value by the fraction of its dimension's seeds strictly below it.
pub fn rank_normalize_approx(m: &FeatureMatrix, reference: &RankReference) -> Result<FeatureMatrix> {
    if reference.dims != m.cols() {
        return Err(Error::DimensionMismatch(format!(
            "rank reference has {} dimensions, matrix has {}",
            reference.dims,
            m.cols()
        )));
    }
    let mut data = m.as_slice().to_vec();
    par::for_each_chunk_mut(&mut data, m.cols(), |_, row| {
        for (d, v) in row.iter_mut().enumerate() {
            *v = reference.approx_rank(d, *v);
        }
    });
    Ok(FeatureMatrix::from_parts(m.rows(), m.cols(), data))
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".json");
    PathBuf::from(p)
}

/// Writes the `S × D` binary matrix at `path` and the sidecar at `<path>.json`.
pub fn write_rank_reference(reference: &RankReference, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    write_matrix(&reference.to_matrix(), path, MatrixFormat::Binary)?;
    write_json(&reference.sidecar(), sidecar_path(path))
}

pub fn read_rank_reference(path: impl AsRef<Path>) -> Result<RankReference> {
    let path = path.as_ref();
    let m = read_matrix(path, MatrixFormat::Binary)?;
    let side_path = sidecar_path(path);
    let side: ReferenceSidecar = read_json(&side_path)?;
    if side.s != m.rows() || side.dims != m.cols() {
        return Err(Error::Format {
            path: side_path,
            format: "reference sidecar",
            location: "s/dims".into(),
            reason: format!("sidecar says {}x{}, matrix is {}x{}", side.s, side.dims, m.rows(), m.cols()),
        });
    }
    let reference = RankReference::from_matrix(&m, side.seed);
    if !reference.to_matrix().bit_eq(&m) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            format: "reference",
            location: "payload".into(),
            reason: "seed columns are not sorted ascending".into(),
        });
    }
    Ok(reference)
}
