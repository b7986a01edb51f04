use serde::{Deserialize, Serialize};

use super::approx::{fit_rank_reference, rank_normalize_approx, RankReference};
use super::rank::{rank_normalize_exact, within_group_rank_normalize, TiePolicy};
use super::{check_alpha, l2_normalize, power_normalize};
use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, Matrix};

/// One normalization step. Serializes externally tagged, e.g.
/// `{"power":{"alpha":0.5}}` or `{"l2":{}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Step {
    L2 {},
    Power {
        alpha: f64,
    },
    RankExact {
        #[serde(default)]
        tie: TiePolicy,
    },
    /// Rank against `s` seed rows drawn with `seed`, unless a reference is supplied.
    RankApprox {
        s: usize,
        seed: u64,
    },
    /// Exact ranking inside consecutive blocks of `group_size` rows
    /// (the last block may be shorter).
    WithinGroupRank {
        group_size: usize,
        #[serde(default)]
        tie: TiePolicy,
    },
}

impl Step {
    pub fn l2() -> Step {
        Step::L2 {}
    }

    pub fn power(alpha: f64) -> Step {
        Step::Power { alpha }
    }

    pub fn rank_exact() -> Step {
        Step::RankExact { tie: TiePolicy::Average }
    }

    pub fn rank_approx(s: usize, seed: u64) -> Step {
        Step::RankApprox { s, seed }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Step::Power { alpha } => check_alpha(alpha),
            Step::RankApprox { s: 0, .. } => Err(Error::InvalidParameter("rank_approx needs s >= 1".into())),
            Step::WithinGroupRank { group_size: 0, .. } => {
                Err(Error::InvalidParameter("within_group_rank needs group_size >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Short label such as `PN(0.5)` used in reports.
    pub fn label(&self) -> String {
        match self {
            Step::L2 {} => "L2".into(),
            Step::Power { alpha } => format!("PN({alpha})"),
            Step::RankExact { .. } => "RaN".into(),
            Step::RankApprox { s, .. } => format!("RaN-approx(S={s})"),
            Step::WithinGroupRank { group_size, .. } => format!("RaN-group({group_size})"),
        }
    }
}

/// Ordered list of steps applied left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizationPipeline {
    pub steps: Vec<Step>,
}

impl NormalizationPipeline {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        let p = NormalizationPipeline { steps };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::InvalidParameter("pipeline has no steps".into()));
        }
        self.steps.iter().try_for_each(Step::validate)
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.steps.iter().map(Step::label).collect();
        format!("[{}]", parts.join(", "))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let p: NormalizationPipeline = serde_json::from_str(text)
            .map_err(|e| Error::InvalidParameter(format!("pipeline json: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// Fits the data-dependent state of each step on `train`.
    ///
    /// Approximate-rank steps draw their seeds from the training rows as they
    /// look at that point of the pipeline. Exact-rank steps follow `exact`.
    pub fn fit(&self, train: &FeatureMatrix, exact: ExactRanking) -> Result<FittedPipeline> {
        self.validate()?;
        let mut steps = Vec::with_capacity(self.steps.len());
        let mut current = train.clone();
        for step in &self.steps {
            let fitted = match *step {
                Step::RankApprox { s, seed } => FittedStep::Reference(fit_rank_reference(&current, s, seed)?),
                Step::RankExact { .. } => match exact {
                    ExactRanking::PerMatrix => FittedStep::Stateless(step.clone()),
                    ExactRanking::TrainReference => FittedStep::Reference(RankReference::from_matrix(&current, None)),
                },
                _ => FittedStep::Stateless(step.clone()),
            };
            current = fitted.apply(&current)?;
            steps.push(fitted);
        }
        Ok(FittedPipeline { steps })
    }
}

/// How exact rank steps treat out-of-sample data once a pipeline is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactRanking {
    /// Rank over whatever matrix is transformed. Transforming train and
    /// test stacked together gives joint (transductive) ranking.
    PerMatrix,
    /// Rank every row against all training rows (a reference with `S = N_train`),
    /// so test rows never influence each other.
    #[default]
    TrainReference,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedStep {
    Stateless(Step),
    Reference(RankReference),
}

impl FittedStep {
    fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        match self {
            FittedStep::Reference(r) => rank_normalize_approx(m, r),
            FittedStep::Stateless(step) => apply_step(m, step, None),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedPipeline {
    steps: Vec<FittedStep>,
}

impl FittedPipeline {
    pub fn steps(&self) -> &[FittedStep] {
        &self.steps
    }

    pub fn transform(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut current = m.clone();
        for step in &self.steps {
            current = step.apply(&current)?;
        }
        Ok(current)
    }
}

fn apply_step(m: &FeatureMatrix, step: &Step, reference: Option<&RankReference>) -> Result<FeatureMatrix> {
    match *step {
        Step::L2 {} => Ok(l2_normalize(m)),
        Step::Power { alpha } => power_normalize(m, alpha),
        Step::RankExact { tie } => Ok(rank_normalize_exact(m, tie)),
        Step::RankApprox { s, seed } => match reference {
            Some(r) => rank_normalize_approx(m, r),
            None => rank_normalize_approx(m, &fit_rank_reference(m, s, seed)?),
        },
        Step::WithinGroupRank { group_size, tie } => {
            let groups: Vec<Matrix> = (0..m.rows())
                .step_by(group_size)
                .map(|start| {
                    let idx: Vec<usize> = (start..(start + group_size).min(m.rows())).collect();
                    m.select_rows(&idx)
                })
                .collect::<Result<_>>()?;
            let ranked = within_group_rank_normalize(&groups, tie)?;
            let data: Vec<f64> = ranked.iter().flat_map(|g| g.as_slice().iter().copied()).collect();
            Ok(Matrix::from_parts(m.rows(), m.cols(), data))
        }
    }
}

/// Applies the steps left to right.
///
/// `train_ref`, when given, is used by every `rank_approx` step in place of
/// fitting seeds on the matrix being transformed; it must have been fitted on
/// data in the same space as that step's input.
pub fn apply_pipeline(
    m: &FeatureMatrix,
    pipeline: &NormalizationPipeline,
    train_ref: Option<&RankReference>,
) -> Result<FeatureMatrix> {
    pipeline.validate()?;
    let mut current = m.clone();
    for step in &pipeline.steps {
        current = apply_step(&current, step, train_ref)?;
    }
    Ok(current)
}
