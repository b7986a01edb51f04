//! Multi-class iterative re-ranking of one-vs-rest score matrices.
//!
//! Each iteration lowers every score by an exponentially weighted sum of the
//! other classes' scores for the same sample, sorted descending. Samples with
//! one dominant class lose little; samples whose scores are flat across
//! classes are pushed down.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Matrix, ScoreMatrix};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirParams {
    /// Annealing factor; iteration `w` is scaled by `eta^(w-1)`.
    pub eta: f64,
    /// Decay of the weights `exp(-beta * r)` over sorted competitor position `r`.
    pub beta: f64,
    /// Total iteration steps; `iters - 1` update sweeps are run.
    pub iters: usize,
}

impl Default for MirParams {
    fn default() -> Self {
        MirParams { eta: 0.5, beta: 1.0, iters: 4 }
    }
}

impl MirParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidParameter(format!("mir eta must be > 0, got {}", self.eta)));
        }
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return Err(Error::InvalidParameter(format!("mir beta must be > 0, got {}", self.beta)));
        }
        if self.iters == 0 {
            return Err(Error::InvalidParameter("mir iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Score matrices after each iteration, for convergence plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MirTrace {
    pub params: MirParams,
    /// `iters` snapshots; the first is the input, the last the output. Row-major.
    pub snapshots: Vec<Vec<f64>>,
    pub rows: usize,
    pub cols: usize,
    /// Largest absolute change made by each update sweep (`iters - 1` entries).
    pub max_update: Vec<f64>,
}

/// One update sweep over a row, reading `row` and writing into `out`.
///
/// `sorted` and `weights` are scratch: `weights[r] = exp(-beta * (r + 1))`.
fn update_row(row: &[f64], out: &mut [f64], scale: f64, weights: &[f64], sorted: &mut Vec<f64>) {
    let k = row.len();
    sorted.clear();
    sorted.extend_from_slice(row);
    sorted.sort_by(|a, b| b.total_cmp(a));
    for (&p, o) in row.iter().zip(out.iter_mut()) {
        // Competitors of p are the descending row with one copy of p
        // removed. Which copy is removed among equal values does not change
        // the sequence of values.
        let skip = sorted
            .iter()
            .position(|v| v.to_bits() == p.to_bits())
            .expect("value is present in its own row");
        let mut acc = 0.0;
        let mut r = 0;
        for (pos, &v) in sorted.iter().enumerate() {
            if pos == skip {
                continue;
            }
            acc += weights[r] * v;
            r += 1;
        }
        debug_assert_eq!(r, k - 1);
        *o = p - scale * acc;
    }
}

fn run(p: &ScoreMatrix, params: &MirParams, mut on_step: impl FnMut(&[f64], f64)) -> Result<ScoreMatrix> {
    params.validate()?;
    let (n, k) = p.shape();
    let weights: Vec<f64> = (1..k).map(|r| (-params.beta * r as f64).exp()).collect();
    let mut current = p.as_slice().to_vec();
    let mut next = vec![0.0; current.len()];
    for w in 1..params.iters {
        let scale = params.eta.powi((w - 1) as i32);
        let src = &current;
        par::for_each_chunk_mut(&mut next, k, |i, out| {
            let mut sorted = Vec::with_capacity(k);
            update_row(&src[i * k..(i + 1) * k], out, scale, &weights, &mut sorted);
        });
        let delta = current.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        std::mem::swap(&mut current, &mut next);
        on_step(&current, delta);
    }
    Matrix::from_computed(n, k, current)
}

/// Runs `iters - 1` synchronous update sweeps and returns the final scores.
pub fn mir_rerank(p: &ScoreMatrix, params: &MirParams) -> Result<ScoreMatrix> {
    run(p, params, |_, _| {})
}

/// [`mir_rerank`] that also records every intermediate matrix.
pub fn mir_rerank_traced(p: &ScoreMatrix, params: &MirParams) -> Result<(ScoreMatrix, MirTrace)> {
    let mut snapshots = vec![p.as_slice().to_vec()];
    let mut max_update = Vec::new();
    let out = run(p, params, |m, d| {
        snapshots.push(m.to_vec());
        max_update.push(d);
    })?;
    let trace = MirTrace {
        params: *params,
        snapshots,
        rows: p.rows(),
        cols: p.cols(),
        max_update,
    };
    Ok((out, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MinMaxMode {
    PerRow,
    Global,
}

fn minmax(values: &mut [f64]) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    for v in values.iter_mut() {
        *v = if range > 0.0 { (*v - lo) / range } else { 0.5 };
    }
}

/// Affine map onto `[0, 1]` per row or over the whole matrix.
/// Constant rows (or a constant matrix) map to 0.5.
pub fn minmax_normalize_scores(p: &ScoreMatrix, mode: MinMaxMode) -> ScoreMatrix {
    let mut data = p.as_slice().to_vec();
    match mode {
        MinMaxMode::PerRow => par::for_each_chunk_mut(&mut data, p.cols(), |_, row| minmax(row)),
        MinMaxMode::Global => minmax(&mut data),
    }
    Matrix::from_parts(p.rows(), p.cols(), data)
}

/// Row `i` min-max normalized and sorted descending.
pub fn rolloff_profile(p: &ScoreMatrix, i: usize) -> Result<Vec<f64>> {
    if i >= p.rows() {
        return Err(Error::DimensionMismatch(format!("row {i} out of range for {} rows", p.rows())));
    }
    let mut row = p.row(i).to_vec();
    minmax(&mut row);
    row.sort_by(|a, b| b.total_cmp(a));
    Ok(row)
}
