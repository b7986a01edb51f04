use std::fs;
use std::path::{Path, PathBuf};

use rankmir::classify::{predict_scores, read_model, train_ovr_linear, write_model};
use rankmir::evaluate::{column_std_profile, cosine_similarity_stats, map_report, value_histogram, CosineStats, Histogram};
use rankmir::io::{read_labels, read_matrix, write_json, write_labels, write_matrix, MatrixFormat};
use rankmir::normalize::{apply_pipeline, fit_rank_reference, read_rank_reference, write_rank_reference};
use rankmir::repro::{run_repro, ReproConfig};
use rankmir::rerank::mir_rerank_traced;
use rankmir::synth::{benchmark_split, generate_sparse_bursty};
use rankmir::{Error, LabelVector, Matrix, NormalizationPipeline, Result};
use serde::Serialize;

use crate::config::{EvaluationOptions, RunConfig};
use crate::{
    EvaluateArgs, FitReferenceArgs, NormalizeArgs, PredictArgs, ReproArgs, RerankArgs, StatsArgs, SynthArgs, TrainArgs,
};

/// Settings shared by every command.
pub struct Ctx {
    pub config: RunConfig,
    pub csv_header: bool,
}

impl Ctx {
    fn format(&self, path: &Path) -> MatrixFormat {
        match MatrixFormat::from_path(path) {
            MatrixFormat::Csv { .. } => MatrixFormat::Csv { header: self.csv_header },
            f => f,
        }
    }

    fn read(&self, path: &Path) -> Result<Matrix> {
        read_matrix(path, self.format(path))
    }

    fn write(&self, m: &Matrix, path: &Path) -> Result<()> {
        write_matrix(m, path, self.format(path))
    }

    fn out_dir(&self, flag: &Option<PathBuf>) -> Result<PathBuf> {
        let dir = flag
            .clone()
            .or_else(|| self.config.output_dir.clone())
            .ok_or_else(|| Error::InvalidParameter("an output directory is required (--out-dir or output_dir)".into()))?;
        fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        Ok(dir)
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        flag.or(self.config.seed)
            .ok_or_else(|| Error::InvalidParameter("this command is randomized: pass --seed or set `seed` in the config".into()))
    }
}

fn require(flag: &Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| fallback.clone())
        .ok_or_else(|| Error::InvalidParameter(format!("missing {name}: pass --{name} or set it in the config")))
}

fn print_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("serializable report");
    // Closed pipes are ignored.
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

#[derive(Serialize)]
struct Written {
    files: Vec<PathBuf>,
}

pub fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let mut p = ctx.config.synth.clone().unwrap_or_else(|| ReproConfig::default().synth);
    p.seed = ctx.seed(a.seed)?;
    macro_rules! set {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { p.$field = v; } )* };
    }
    set!(n_per_class, k, d, p_sparse, burst_dims, burst_scale, signal_strength, noise_sigma);
    let dir = ctx.out_dir(&a.out_dir)?;
    let (x, y) = generate_sparse_bursty(&p)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, m: &Matrix, labels: &LabelVector| -> Result<()> {
        let fp = dir.join(format!("{name}features.bin"));
        let lp = dir.join(format!("{name}labels.txt"));
        ctx.write(m, &fp)?;
        write_labels(labels, &lp)?;
        files.push(fp);
        files.push(lp);
        Ok(())
    };
    emit("", &x, &y)?;
    if let Some(frac) = a.train_fraction {
        let split = benchmark_split(&x, &y, frac, a.split_seed.unwrap_or(p.seed))?;
        emit("train_", &split.train_x, &split.train_y)?;
        emit("test_", &split.test_x, &split.test_y)?;
    }
    let params = dir.join("synth_params.json");
    write_json(&p, &params)?;
    files.push(params);
    print_json(&Written { files });
    Ok(())
}

fn load_pipeline(ctx: &Ctx, a: &NormalizeArgs) -> Result<NormalizationPipeline> {
    if let Some(text) = &a.steps {
        return NormalizationPipeline::from_json(text);
    }
    if let Some(path) = &a.pipeline {
        let text = fs::read_to_string(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        return NormalizationPipeline::from_json(&text);
    }
    ctx.config
        .pipeline
        .clone()
        .ok_or_else(|| Error::InvalidParameter("missing pipeline: pass --pipeline, --steps or set `pipeline`".into()))
}

pub fn normalize(ctx: &Ctx, a: &NormalizeArgs) -> Result<()> {
    let input = require(&a.input, &ctx.config.inputs.features, "input")?;
    let pipeline = load_pipeline(ctx, a)?;
    let m = ctx.read(&input)?;
    let reference = a.reference.clone().or_else(|| ctx.config.inputs.reference.clone());
    let fit_on = a.fit_on.clone().or_else(|| ctx.config.inputs.fit_on.clone());
    let out = match (reference, fit_on) {
        (Some(r), _) => apply_pipeline(&m, &pipeline, Some(&read_rank_reference(r)?))?,
        (None, Some(train)) => {
            let mode = a.exact_ranking.or(ctx.config.exact_ranking).unwrap_or_default();
            pipeline.fit(&ctx.read(&train)?, mode)?.transform(&m)?
        }
        (None, None) => apply_pipeline(&m, &pipeline, None)?,
    };
    ctx.write(&out, &a.output)
}

pub fn fit_reference(ctx: &Ctx, a: &FitReferenceArgs) -> Result<()> {
    let input = require(&a.input, &ctx.config.inputs.features, "input")?;
    let m = ctx.read(&input)?;
    let reference = fit_rank_reference(&m, a.s, ctx.seed(a.seed)?)?;
    write_rank_reference(&reference, &a.output)
}

pub fn train(ctx: &Ctx, a: &TrainArgs) -> Result<()> {
    let features = require(&a.features, &ctx.config.inputs.features, "features")?;
    let labels = require(&a.labels, &ctx.config.inputs.labels, "labels")?;
    let mut h = ctx.config.classifier.unwrap_or_default();
    if let Some(c) = a.c {
        h.c = c;
    }
    if let Some(e) = a.epochs {
        h.epochs = e;
    }
    if let Some(lr) = a.learning_rate {
        h.learning_rate = lr;
    }
    if let Some(n) = a.init_noise {
        h.init_noise = n;
    }
    let seed = if h.init_noise > 0.0 { ctx.seed(a.seed)? } else { a.seed.or(ctx.config.seed).unwrap_or(0) };
    let x = ctx.read(&features)?;
    let y = read_labels(&labels)?;
    let model = train_ovr_linear(&x, &y, &h, seed)?;
    write_model(&model, &a.model_out)
}

pub fn predict(ctx: &Ctx, a: &PredictArgs) -> Result<()> {
    let model = require(&a.model, &ctx.config.inputs.model, "model")?;
    let features = require(&a.features, &ctx.config.inputs.features, "features")?;
    let scores = predict_scores(&read_model(model)?, &ctx.read(&features)?)?;
    ctx.write(&scores, &a.out)
}

pub fn rerank(ctx: &Ctx, a: &RerankArgs) -> Result<()> {
    let scores = require(&a.scores, &ctx.config.inputs.scores, "scores")?;
    let mut params = ctx.config.mir.unwrap_or_default();
    if let Some(v) = a.eta {
        params.eta = v;
    }
    if let Some(v) = a.beta {
        params.beta = v;
    }
    if let Some(v) = a.iters {
        params.iters = v;
    }
    let p = ctx.read(&scores)?;
    let (out, trace) = mir_rerank_traced(&p, &params)?;
    ctx.write(&out, &a.out)?;
    if let Some(path) = &a.trace {
        write_json(&trace, path)?;
    }
    Ok(())
}

pub fn evaluate(ctx: &Ctx, a: &EvaluateArgs) -> Result<()> {
    let scores = require(&a.scores, &ctx.config.inputs.scores, "scores")?;
    let labels = require(&a.labels, &ctx.config.inputs.labels, "labels")?;
    let report = map_report(&ctx.read(&scores)?, &read_labels(labels)?)?;
    if let Some(out) = &a.out {
        write_json(&report, out)?;
    }
    print_json(&report);
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub rows: usize,
    pub cols: usize,
    pub zero_fraction: f64,
    pub value_histogram: Histogram,
    pub std_profile: Vec<f64>,
    pub cosine: Vec<CosineStats>,
}

pub fn compute_stats(m: &Matrix, labels: Option<&LabelVector>, opts: &EvaluationOptions) -> Result<StatsReport> {
    let zeros = m.as_slice().iter().filter(|&&v| v == 0.0).count();
    let mut cosine = Vec::new();
    if let Some(y) = labels {
        y.validate(m.rows(), usize::MAX)?;
        match opts.cosine_class {
            Some(k) => cosine.push(cosine_similarity_stats(m, y, k, opts.bins)?),
            None => {
                for k in 0..y.num_classes() {
                    // Classes without two positives have no pos-pos pairs to report.
                    if let Ok(s) = cosine_similarity_stats(m, y, k, opts.bins) {
                        cosine.push(s);
                    }
                }
            }
        }
    }
    Ok(StatsReport {
        rows: m.rows(),
        cols: m.cols(),
        zero_fraction: zeros as f64 / m.as_slice().len() as f64,
        value_histogram: value_histogram(m, opts.bins, opts.range)?,
        std_profile: column_std_profile(m),
        cosine,
    })
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

pub fn stats(ctx: &Ctx, a: &StatsArgs) -> Result<()> {
    let features = require(&a.features, &ctx.config.inputs.features, "features")?;
    let labels = a.labels.clone().or_else(|| ctx.config.inputs.labels.clone());
    let mut opts = ctx.config.evaluation.clone().unwrap_or_default();
    if let Some(b) = a.bins {
        opts.bins = b;
    }
    if let (Some(lo), Some(hi)) = (a.range_lo, a.range_hi) {
        opts.range = Some((lo, hi));
    } else if a.range_lo.is_some() || a.range_hi.is_some() {
        return Err(Error::InvalidParameter("--range-lo and --range-hi must be given together".into()));
    }
    if a.class.is_some() {
        opts.cosine_class = a.class;
    }
    let m = ctx.read(&features)?;
    let y = labels.map(read_labels).transpose()?;
    let report = compute_stats(&m, y.as_ref(), &opts)?;
    write_json(&report, &a.out)?;
    if let Some(dir) = &a.csv_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        write_text(&dir.join("value_histogram.csv"), report.value_histogram.to_csv())?;
        let mut std_csv = String::from("dim,std\n");
        for (j, s) in report.std_profile.iter().enumerate() {
            std_csv.push_str(&format!("{j},{s:.16e}\n"));
        }
        write_text(&dir.join("std_profile.csv"), std_csv)?;
        for c in &report.cosine {
            write_text(&dir.join(format!("cosine_pos_pos_class{}.csv", c.class)), c.pos_pos.to_csv())?;
            write_text(&dir.join(format!("cosine_pos_neg_class{}.csv", c.class)), c.pos_neg.to_csv())?;
        }
    }
    Ok(())
}

pub fn repro(ctx: &Ctx, a: &ReproArgs) -> Result<()> {
    if a.print_default_config {
        print_json(&ReproConfig::default());
        return Ok(());
    }
    let mut cfg = match &a.experiment {
        Some(path) => rankmir::io::read_json::<ReproConfig>(path)?,
        None => ctx.config.repro.clone().unwrap_or_default(),
    };
    if let Some(seed) = a.seed.or(ctx.config.seed) {
        cfg.synth.seed = seed;
    }
    if let Some(h) = ctx.config.classifier {
        cfg.classifier = h;
    }
    if let Some(m) = ctx.config.mir {
        cfg.mir = m;
    }
    if let Some(mode) = a.exact_ranking.or(ctx.config.exact_ranking) {
        cfg.exact_ranking = mode;
    }
    let report = run_repro(&cfg)?;
    let out = match &a.out {
        Some(p) => p.clone(),
        None => ctx.out_dir(&None)?.join("repro_report.json"),
    };
    write_json(&report, &out)?;
    print_json(&Summary::from(&report));
    Ok(())
}

#[derive(Serialize)]
struct Summary {
    normalization: Vec<(String, f64, f64)>,
    subset_sizes: Vec<(usize, f64, f64)>,
    exact_rank_map: f64,
    mir_curve: Vec<f64>,
}

impl From<&rankmir::repro::ReproReport> for Summary {
    fn from(r: &rankmir::repro::ReproReport) -> Self {
        Summary {
            normalization: r.normalization.iter().map(|p| (p.pipeline.clone(), p.map, p.map_mir)).collect(),
            subset_sizes: r.subset_sizes.iter().map(|s| (s.s, s.map_mean, s.map_std)).collect(),
            exact_rank_map: r.exact_rank_map,
            mir_curve: r.mir_curve.clone(),
        }
    }
}
