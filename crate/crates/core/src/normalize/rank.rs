use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::par;

/// How tied values share ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    /// Mean of the ranks the tie group spans.
    #[default]
    Average,
    /// Lowest rank of the group.
    Min,
    /// Highest rank of the group.
    Max,
    /// Distinct ranks in original row order.
    StableOrder,
}

/// Replaces `values` with their 1-based ascending ranks divided by `values.len()`.
///
/// `order` is scratch space for the sorting permutation.
pub fn rank_column(values: &mut [f64], tie: TiePolicy, order: &mut Vec<usize>) {
    let n = values.len();
    order.clear();
    order.extend(0..n);
    // Stable sort: ties keep ascending row order. Values are finite, and
    // partial_cmp treats -0.0 and 0.0 as equal.
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap_or(Ordering::Equal));

    let nf = n as f64;
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let v = values[order[start]];
        let mut end = start;
        while end + 1 < n && values[order[end + 1]] == v {
            end += 1;
        }
        for (p, &row) in order.iter().enumerate().take(end + 1).skip(start) {
            let rank = match tie {
                TiePolicy::Average => (start + end + 2) as f64 / 2.0,
                TiePolicy::Min => (start + 1) as f64,
                TiePolicy::Max => (end + 1) as f64,
                TiePolicy::StableOrder => (p + 1) as f64,
            };
            ranks[row] = rank / nf;
        }
        start = end + 1;
    }
    values.copy_from_slice(&ranks);
}

/// Ranks every column independently: each value becomes `rank / N`.
pub fn rank_normalize_exact(m: &FeatureMatrix, tie: TiePolicy) -> FeatureMatrix {
    let (n, d) = m.shape();
    let mut cols = m.to_column_major();
    par::for_each_chunk_mut(&mut cols, n, |_, col| {
        let mut order = Vec::with_capacity(n);
        rank_column(col, tie, &mut order);
    });
    FeatureMatrix::from_column_major(n, d, &cols)
}

/// Exact rank normalization applied separately inside each group.
pub fn within_group_rank_normalize(groups: &[FeatureMatrix], tie: TiePolicy) -> Result<Vec<FeatureMatrix>> {
    let Some(first) = groups.first() else {
        return Ok(Vec::new());
    };
    if let Some((g, bad)) = groups.iter().enumerate().find(|(_, g)| g.cols() != first.cols()) {
        return Err(Error::DimensionMismatch(format!(
            "group {g} has {} columns, group 0 has {}",
            bad.cols(),
            first.cols()
        )));
    }
    Ok(groups.iter().map(|g| rank_normalize_exact(g, tie)).collect())
}
