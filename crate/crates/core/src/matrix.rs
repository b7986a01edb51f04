//! Dense row-major matrices and label vectors shared by every stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `rows × cols` matrix of finite `f64` values stored row-major.
///
/// Instances are immutable once built and always satisfy the invariants
/// checked by [`validate_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// One row per sample, one column per feature dimension.
pub type FeatureMatrix = Matrix;

/// One row per sample, one column per class; entries are classifier decision values.
pub type ScoreMatrix = Matrix;

/// Checks the matrix invariants: both dimensions non-zero, `data.len() == rows * cols`,
/// and every value finite. Non-finite values are reported with their position.
pub fn validate_matrix(rows: usize, cols: usize, data: &[f64]) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch(format!(
            "matrix must have at least one row and one column, got {rows}x{cols}"
        )));
    }
    let expected = rows.checked_mul(cols).ok_or_else(|| {
        Error::DimensionMismatch(format!("{rows}x{cols} overflows the address space"))
    })?;
    if data.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "declared {rows}x{cols} ({expected} values) but got {} values",
            data.len()
        )));
    }
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / cols,
            col: pos % cols,
            value: data[pos],
        });
    }
    Ok(())
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        validate_matrix(rows, cols, &data)?;
        Ok(Matrix { rows, cols, data })
    }

    /// Builds from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} values, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Matrix::new(n, d, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Matrix::new(rows, cols, vec![0.0; rows * cols])
    }

    /// Caller guarantees the invariants; only checked in debug builds.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert!(validate_matrix(rows, cols, &data).is_ok());
        Matrix { rows, cols, data }
    }

    /// Like [`Matrix::new`] but used for computed outputs, where a non-finite
    /// value means an arithmetic overflow upstream.
    pub(crate) fn from_computed(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Matrix::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.cols)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.data[j..].iter().step_by(self.cols).copied().collect()
    }

    /// Column-major copy of the data (`cols` chunks of length `rows`).
    pub fn to_column_major(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.data.len()];
        for (i, row) in self.row_iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                out[j * self.rows + i] = v;
            }
        }
        out
    }

    pub(crate) fn from_column_major(rows: usize, cols: usize, col_major: &[f64]) -> Self {
        let mut data = vec![0.0; rows * cols];
        for (j, col) in col_major.chunks_exact(rows).enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * cols + j] = v;
            }
        }
        Matrix::from_parts(rows, cols, data)
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_parts(self.cols, self.rows, self.to_column_major())
    }

    /// New matrix made of the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Matrix> {
        if indices.is_empty() {
            return Err(Error::DimensionMismatch("row selection is empty".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            if i >= self.rows {
                return Err(Error::DimensionMismatch(format!(
                    "row index {i} out of range for {} rows",
                    self.rows
                )));
            }
            data.extend_from_slice(self.row(i));
        }
        Ok(Matrix::from_parts(indices.len(), self.cols, data))
    }

    /// Stacks `other` below `self`.
    pub fn vstack(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot stack {} columns on {} columns",
                other.cols, self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Matrix::from_parts(self.rows + other.rows, self.cols, data))
    }

    /// Element-wise map. Fails if `f` produces a non-finite value.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        Matrix::from_computed(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// Builds a same-shape matrix row by row; `f(row, out)` fills `out`.
    pub(crate) fn map_rows(&self, f: impl Fn(&[f64], &mut [f64]) + Sync + Send) -> Matrix {
        let mut data = vec![0.0; self.data.len()];
        let src = &self.data;
        let cols = self.cols;
        crate::par::for_each_chunk_mut(&mut data, cols, |i, out| f(&src[i * cols..(i + 1) * cols], out));
        Matrix::from_parts(self.rows, cols, data)
    }

    pub fn scale(&self, c: f64) -> Result<Matrix> {
        self.map(|v| v * c)
    }

    /// Largest absolute element-wise difference. Shapes must match.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Bitwise equality, distinguishing `-0.0` from `0.0`.
    pub fn bit_eq(&self, other: &Matrix) -> bool {
        self.shape() == other.shape()
            && self
                .data
                .iter()
                .zip(&other.data)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Ground-truth class index per sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>) -> Self {
        LabelVector(labels)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.0
    }

    /// `max label + 1`, or 0 for an empty vector.
    pub fn num_classes(&self) -> usize {
        self.0.iter().max().map_or(0, |m| m + 1)
    }

    /// Per-class sample counts, length [`num_classes`](Self::num_classes).
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.0 {
            counts[l] += 1;
        }
        counts
    }

    pub fn select(&self, indices: &[usize]) -> LabelVector {
        LabelVector(indices.iter().map(|&i| self.0[i]).collect())
    }

    pub fn concat(&self, other: &LabelVector) -> LabelVector {
        LabelVector(self.0.iter().chain(&other.0).copied().collect())
    }

    /// Checks the vector against a matrix with `rows` rows and `k` classes.
    pub fn validate(&self, rows: usize, k: usize) -> Result<()> {
        if self.0.len() != rows {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {rows} rows",
                self.0.len()
            )));
        }
        if let Some((i, &l)) = self.0.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(Error::DimensionMismatch(format!(
                "label {l} at index {i} is not below class count {k}"
            )));
        }
        Ok(())
    }
}

impl From<Vec<usize>> for LabelVector {
    fn from(v: Vec<usize>) -> Self {
        LabelVector(v)
    }
}
