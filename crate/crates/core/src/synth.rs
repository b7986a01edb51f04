//! Synthetic class-structured data with sparse and bursty entries.
//!
//! Row `i` belongs to class `i % K`. Each class owns a contiguous signal
//! block of dimensions (`[k·D/K, (k+1)·D/K)`) where non-zero entries have
//! mean `signal_strength`, and a random set of `burst_dims` dimensions whose
//! entries are multiplied by log-normal factors. All randomness comes from a
//! single ChaCha8 stream seeded with `seed`, consumed in row order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, LabelVector, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub n_per_class: usize,
    pub k: usize,
    pub d: usize,
    /// Probability that an entry is exactly zero.
    pub p_sparse: f64,
    /// Heavy-tailed dimensions per class.
    pub burst_dims: usize,
    /// Sigma of the log-normal burst multiplier; 0 disables bursts.
    pub burst_scale: f64,
    /// Mean of non-zero entries inside the class's signal block.
    pub signal_strength: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_per_class == 0 || self.k == 0 || self.d == 0 {
            return bad(format!(
                "n_per_class, k and d must be positive, got {}, {}, {}",
                self.n_per_class, self.k, self.d
            ));
        }
        if self.burst_dims > self.d {
            return bad(format!("burst_dims {} exceeds d {}", self.burst_dims, self.d));
        }
        if !(0.0..1.0).contains(&self.p_sparse) {
            return bad(format!("p_sparse must lie in [0, 1), got {}", self.p_sparse));
        }
        if !(self.burst_scale.is_finite() && self.burst_scale >= 0.0) {
            return bad(format!("burst_scale must be >= 0, got {}", self.burst_scale));
        }
        if !(self.signal_strength.is_finite() && self.signal_strength >= 0.0) {
            return bad(format!("signal_strength must be >= 0, got {}", self.signal_strength));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma > 0.0) {
            return bad(format!("noise_sigma must be > 0, got {}", self.noise_sigma));
        }
        Ok(())
    }

    fn signal_block(&self, class: usize) -> std::ops::Range<usize> {
        class * self.d / self.k..(class + 1) * self.d / self.k
    }
}

/// Draws `n_per_class · k` rows and their labels.
pub fn generate_sparse_bursty(params: &SynthParams) -> Result<(FeatureMatrix, LabelVector)> {
    params.validate()?;
    let (k, d) = (params.k, params.d);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut bursty = vec![false; k * d];
    for class in 0..k {
        for dim in rand::seq::index::sample(&mut rng, d, params.burst_dims) {
            bursty[class * d + dim] = true;
        }
    }

    let n = params.n_per_class * k;
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % k;
        let block = params.signal_block(class);
        for dim in 0..d {
            if rng.random::<f64>() < params.p_sparse {
                data.push(0.0);
                continue;
            }
            let mean = if block.contains(&dim) { params.signal_strength } else { 0.0 };
            let z: f64 = StandardNormal.sample(&mut rng);
            let mut v = mean + params.noise_sigma * z;
            if bursty[class * d + dim] {
                let g: f64 = StandardNormal.sample(&mut rng);
                v *= (params.burst_scale * g).exp();
            }
            data.push(v);
        }
        labels.push(class);
    }
    Ok((Matrix::new(n, d, data)?, LabelVector::new(labels)))
}

/// Train/test partition with row order preserved inside each side.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train_x: FeatureMatrix,
    pub train_y: LabelVector,
    pub test_x: FeatureMatrix,
    pub test_y: LabelVector,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

/// Stratified split: each class contributes `round(fraction · n_c)` rows to
/// training, clamped so both sides keep at least one row of every class.
pub fn benchmark_split(x: &FeatureMatrix, y: &LabelVector, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train_fraction must lie in (0, 1), got {train_fraction}")));
    }
    y.validate(x.rows(), usize::MAX)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_train = vec![false; x.rows()];
    for (class, &count) in y.class_counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        if count < 2 {
            return Err(Error::InsufficientSamples(format!(
                "class {class} has {count} sample; stratified splitting needs at least 2"
            )));
        }
        let mut members: Vec<usize> = (0..x.rows()).filter(|&i| y.as_slice()[i] == class).collect();
        members.shuffle(&mut rng);
        let take = ((train_fraction * count as f64).round() as usize).clamp(1, count - 1);
        for &i in &members[..take] {
            is_train[i] = true;
        }
    }
    let train_idx: Vec<usize> = (0..x.rows()).filter(|&i| is_train[i]).collect();
    let test_idx: Vec<usize> = (0..x.rows()).filter(|&i| !is_train[i]).collect();
    Ok(Split {
        train_x: x.select_rows(&train_idx)?,
        train_y: y.select(&train_idx),
        test_x: x.select_rows(&test_idx)?,
        test_y: y.select(&test_idx),
        train_idx,
        test_idx,
    })
}
