//! End-to-end comparison of normalization pipelines on synthetic data.
//!
//! Generates a sparse/bursty dataset, splits it, and for every pipeline fits
//! the normalization on the training rows, trains the one-vs-rest classifier,
//! scores the test rows and reports mAP before and after re-ranking.

use serde::{Deserialize, Serialize};

use crate::classify::{predict_scores, train_ovr_linear, Hyperparams};
use crate::error::{Error, Result};
use crate::evaluate::map_report;
use crate::matrix::{FeatureMatrix, LabelVector, Matrix};
use crate::normalize::{ExactRanking, NormalizationPipeline, Step};
use crate::par;
use crate::rerank::{mir_rerank, mir_rerank_traced, MirParams};
use crate::synth::{benchmark_split, generate_sparse_bursty, Split, SynthParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproConfig {
    pub synth: SynthParams,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub classifier: Hyperparams,
    pub mir: MirParams,
    pub pn_alpha: f64,
    pub subset_sizes: Vec<usize>,
    /// Independent seed-row draws per subset size.
    pub repeats: usize,
    /// Seed of the first draw; draw `r` uses `approx_seed + r`.
    pub approx_seed: u64,
    #[serde(default)]
    pub exact_ranking: ExactRanking,
    /// Classifier seed (only used with non-zero `init_noise`).
    pub seed: u64,
}

impl Default for ReproConfig {
    /// The shipped configuration: 8 classes of 120 samples in 512 dimensions,
    /// split 60/60 per class.
    fn default() -> Self {
        ReproConfig {
            synth: SynthParams {
                n_per_class: 120,
                k: 8,
                d: 512,
                p_sparse: 0.7,
                burst_dims: 256,
                burst_scale: 2.5,
                signal_strength: 1.6,
                noise_sigma: 1.0,
                seed: 20161017,
            },
            train_fraction: 0.5,
            split_seed: 1,
            classifier: Hyperparams {
                c: 100.0,
                epochs: 300,
                learning_rate: 1e-4,
                init_noise: 0.0,
            },
            mir: MirParams::default(),
            pn_alpha: 0.5,
            subset_sizes: vec![1, 5, 10, 50, 100],
            repeats: 10,
            approx_seed: 1000,
            exact_ranking: ExactRanking::TrainReference,
            seed: 0,
        }
    }
}

impl ReproConfig {
    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.classifier.validate()?;
        self.mir.validate()?;
        crate::normalize::check_alpha(self.pn_alpha)?;
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be >= 1".into()));
        }
        if self.subset_sizes.contains(&0) {
            return Err(Error::InvalidParameter("subset sizes must be >= 1".into()));
        }
        Ok(())
    }

    pub fn baseline_pipelines(&self) -> Vec<NormalizationPipeline> {
        vec![
            NormalizationPipeline { steps: vec![Step::l2()] },
            NormalizationPipeline { steps: vec![Step::power(self.pn_alpha), Step::l2()] },
            NormalizationPipeline { steps: vec![Step::rank_exact(), Step::l2()] },
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub pipeline: String,
    pub map: f64,
    pub map_mir: f64,
    pub per_class_ap: Vec<f64>,
    pub per_class_ap_mir: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub s: usize,
    pub map_mean: f64,
    pub map_std: f64,
    pub map_mir_mean: f64,
    pub map_mir_std: f64,
    pub maps: Vec<f64>,
    pub maps_mir: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproReport {
    pub config: ReproConfig,
    pub train_rows: usize,
    pub test_rows: usize,
    /// `[L2]`, `[PN, L2]`, `[RaN, L2]` in that order.
    pub normalization: Vec<PipelineResult>,
    /// Exact-rank mAP that the subset-size rows are compared against.
    pub exact_rank_map: f64,
    pub exact_rank_map_mir: f64,
    pub subset_sizes: Vec<SubsetResult>,
    /// mAP of the `[RaN, L2]` test scores after each MIR iteration (first entry: no re-ranking).
    pub mir_curve: Vec<f64>,
}

/// Train-side and test-side features after normalization.
pub fn normalize_split(
    split: &Split,
    pipeline: &NormalizationPipeline,
    exact: ExactRanking,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let fitted = pipeline.fit(&split.train_x, exact)?;
    let has_exact = pipeline.steps.iter().any(|s| matches!(s, Step::RankExact { .. }));
    if exact == ExactRanking::PerMatrix && has_exact {
        // Joint ranking over train and test rows.
        let stacked = fitted.transform(&split.train_x.vstack(&split.test_x)?)?;
        let n = split.train_x.rows();
        let train: Vec<usize> = (0..n).collect();
        let test: Vec<usize> = (n..stacked.rows()).collect();
        Ok((stacked.select_rows(&train)?, stacked.select_rows(&test)?))
    } else {
        Ok((fitted.transform(&split.train_x)?, fitted.transform(&split.test_x)?))
    }
}

/// Test-set scores of a classifier trained on the normalized training rows.
pub fn test_scores(
    split: &Split,
    pipeline: &NormalizationPipeline,
    config: &ReproConfig,
) -> Result<Matrix> {
    let (train, test) = normalize_split(split, pipeline, config.exact_ranking)?;
    let model = train_ovr_linear(&train, &split.train_y, &config.classifier, config.seed)?;
    predict_scores(&model, &test)
}

pub fn evaluate_pipeline(split: &Split, pipeline: &NormalizationPipeline, config: &ReproConfig) -> Result<PipelineResult> {
    let scores = test_scores(split, pipeline, config)?;
    let plain = map_report(&scores, &split.test_y)?;
    let reranked = map_report(&mir_rerank(&scores, &config.mir)?, &split.test_y)?;
    Ok(PipelineResult {
        pipeline: pipeline.label(),
        map: plain.map,
        map_mir: reranked.map,
        per_class_ap: plain.per_class_ap,
        per_class_ap_mir: reranked.per_class_ap,
    })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// mAP of approximate ranking with `s` seeds for each of the configured draws,
/// without and with MIR.
pub fn subset_size_maps(split: &Split, s: usize, config: &ReproConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let runs: Vec<Result<(f64, f64)>> = par::map_range(config.repeats, |r| {
        let seed = config.approx_seed.wrapping_add(r as u64);
        let p = NormalizationPipeline { steps: vec![Step::rank_approx(s, seed), Step::l2()] };
        let res = evaluate_pipeline(split, &p, config)?;
        Ok((res.map, res.map_mir))
    });
    let mut maps = Vec::with_capacity(runs.len());
    let mut maps_mir = Vec::with_capacity(runs.len());
    for r in runs {
        let (a, b) = r?;
        maps.push(a);
        maps_mir.push(b);
    }
    Ok((maps, maps_mir))
}

pub fn make_split(config: &ReproConfig) -> Result<(Split, FeatureMatrix, LabelVector)> {
    let (x, y) = generate_sparse_bursty(&config.synth)?;
    let split = benchmark_split(&x, &y, config.train_fraction, config.split_seed)?;
    Ok((split, x, y))
}

pub fn run_repro(config: &ReproConfig) -> Result<ReproReport> {
    config.validate()?;
    let (split, _, _) = make_split(config)?;
    let train_rows = split.train_x.rows();
    for &s in &config.subset_sizes {
        if s > train_rows {
            return Err(Error::InvalidParameter(format!("subset size {s} exceeds {train_rows} training rows")));
        }
    }

    let normalization = config
        .baseline_pipelines()
        .iter()
        .map(|p| evaluate_pipeline(&split, p, config))
        .collect::<Result<Vec<_>>>()?;
    let exact = &normalization[2];

    let mut subset_sizes = Vec::with_capacity(config.subset_sizes.len());
    for &s in &config.subset_sizes {
        let (maps, maps_mir) = subset_size_maps(&split, s, config)?;
        let (map_mean, map_std) = mean_std(&maps);
        let (map_mir_mean, map_mir_std) = mean_std(&maps_mir);
        subset_sizes.push(SubsetResult { s, map_mean, map_std, map_mir_mean, map_mir_std, maps, maps_mir });
    }

    let ran = &config.baseline_pipelines()[2];
    let scores = test_scores(&split, ran, config)?;
    let (_, trace) = mir_rerank_traced(&scores, &config.mir)?;
    let mir_curve = trace
        .snapshots
        .into_iter()
        .map(|snap| map_report(&Matrix::new(trace.rows, trace.cols, snap)?, &split.test_y).map(|r| r.map))
        .collect::<Result<Vec<_>>>()?;

    Ok(ReproReport {
        config: config.clone(),
        train_rows,
        test_rows: split.test_x.rows(),
        exact_rank_map: exact.map,
        exact_rank_map_mir: exact.map_mir,
        normalization,
        subset_sizes,
        mir_curve,
    })
}
