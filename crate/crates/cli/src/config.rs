//! The optional `--config` run file shared by every subcommand.

use std::path::{Path, PathBuf};

use rankmir::classify::Hyperparams;
use rankmir::normalize::ExactRanking;
use rankmir::repro::ReproConfig;
use rankmir::synth::SynthParams;
use rankmir::{Error, MirParams, NormalizationPipeline, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub features: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub reference: Option<PathBuf>,
    /// Training features the normalization is fitted on.
    pub fit_on: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationOptions {
    pub bins: usize,
    pub range: Option<(f64, f64)>,
    /// Class for cosine statistics; all eligible classes when absent.
    pub cosine_class: Option<usize>,
}

impl Default for EvaluationOptions {
    fn default() -> Self {
        EvaluationOptions { bins: 50, range: None, cosine_class: None }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub inputs: Inputs,
    pub pipeline: Option<NormalizationPipeline>,
    pub exact_ranking: Option<ExactRanking>,
    pub classifier: Option<Hyperparams>,
    pub mir: Option<MirParams>,
    pub evaluation: Option<EvaluationOptions>,
    pub synth: Option<SynthParams>,
    pub repro: Option<ReproConfig>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl RunConfig {
    /// Reads and validates a run file. Relative input paths resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = rankmir::io::read_json(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(inner) = p {
                if inner.is_relative() {
                    *inner = base.join(&*inner);
                }
            }
        };
        let i = &mut self.inputs;
        for p in [&mut i.features, &mut i.labels, &mut i.scores, &mut i.model, &mut i.reference, &mut i.fit_on] {
            fix(p);
        }
        fix(&mut self.output_dir);
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.inputs;
        for (name, p) in [
            ("features", &i.features),
            ("labels", &i.labels),
            ("scores", &i.scores),
            ("model", &i.model),
            ("reference", &i.reference),
            ("fit_on", &i.fit_on),
        ] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(Error::InvalidParameter(format!("inputs.{name}: {} does not exist", p.display())));
                }
            }
        }
        if let Some(p) = &self.pipeline {
            p.validate()?;
        }
        if let Some(h) = &self.classifier {
            h.validate()?;
        }
        if let Some(m) = &self.mir {
            m.validate()?;
        }
        if let Some(s) = &self.synth {
            s.validate()?;
        }
        if let Some(r) = &self.repro {
            r.validate()?;
        }
        if let Some(e) = &self.evaluation {
            if e.bins == 0 {
                return Err(Error::InvalidParameter("evaluation.bins must be >= 1".into()));
            }
        }
        Ok(())
    }
}
