//! Rank-based post-processing for dense feature vectors and classifier scores.
//!
//! * [`normalize`]: L2, signed power, exact and approximate rank normalization.
//! * [`rerank`]: multi-class iterative re-ranking of one-vs-rest score matrices.
//! * [`classify`]: a deterministic one-vs-rest squared-hinge linear classifier.
//! * [`evaluate`]: average precision, mAP and distribution diagnostics.
//! * [`synth`]: sparse, bursty synthetic data with class structure.
//! * [`repro`]: the end-to-end comparison of normalization pipelines.
//!
//! Kernels run on the rayon pool when the `parallel` feature is enabled (the
//! default); results are bit-identical for any thread count.

pub mod classify;
pub mod error;
pub mod evaluate;
pub mod io;
pub mod matrix;
pub mod normalize;
pub mod par;
pub mod repro;
pub mod rerank;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{validate_matrix, FeatureMatrix, LabelVector, Matrix, ScoreMatrix};
pub use normalize::{NormalizationPipeline, RankReference, Step, TiePolicy};
pub use rerank::{MirParams, MirTrace};
