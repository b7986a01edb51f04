//! Feature-space normalizations: L2, power, exact and approximate rank
//! normalization, within-group ranking, and pipelines composing them.

mod approx;
mod pipeline;
mod rank;

pub use approx::{fit_rank_reference, rank_normalize_approx, read_rank_reference, write_rank_reference, RankReference, ReferenceSidecar};
pub use pipeline::{apply_pipeline, ExactRanking, FittedPipeline, FittedStep, NormalizationPipeline, Step};
pub use rank::{rank_column, rank_normalize_exact, within_group_rank_normalize, TiePolicy};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::par;

/// Scales every row with non-zero Euclidean norm to unit length.
/// All-zero rows are returned unchanged.
pub fn l2_normalize(m: &FeatureMatrix) -> FeatureMatrix {
    let cols = m.cols();
    let mut data = m.as_slice().to_vec();
    par::for_each_chunk_mut(&mut data, cols, |_, row| {
        // Fixed left-to-right summation keeps the result independent of threading.
        let mut sq = 0.0;
        for v in row.iter() {
            sq += v * v;
        }
        let norm = sq.sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|v| *v /= norm);
        }
    });
    FeatureMatrix::from_parts(m.rows(), cols, data)
}

/// Signed power `sign(z)·|z|^alpha` for `alpha` in `[0, 1]`; zero stays zero,
/// so `alpha = 0` is the sign function.
#[inline]
pub fn signed_power(z: f64, alpha: f64) -> f64 {
    if z == 0.0 {
        z
    } else {
        z.signum() * z.abs().powf(alpha)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("power alpha must lie in [0, 1], got {alpha}")))
    }
}

/// Element-wise [`signed_power`].
pub fn power_normalize(m: &FeatureMatrix, alpha: f64) -> Result<FeatureMatrix> {
    check_alpha(alpha)?;
    let cols = m.cols();
    let mut data = m.as_slice().to_vec();
    par::for_each_chunk_mut(&mut data, cols, |_, row| {
        row.iter_mut().for_each(|v| *v = signed_power(*v, alpha));
    });
    Ok(FeatureMatrix::from_parts(m.rows(), cols, data))
}
