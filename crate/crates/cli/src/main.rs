//! `rankmir` command-line interface.
//!
//! Every subcommand accepts an optional `--config` run file; flags given on
//! the command line override the values it contains. Failures are reported
//! on stderr as a single JSON object and a nonzero exit code.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rankmir::normalize::ExactRanking;
use rankmir::par;

use crate::commands::Ctx;
use crate::config::RunConfig;

#[derive(Parser)]
#[command(name = "rankmir", version, about = "Rank normalization and multi-class iterative re-ranking")]
struct Cli {
    /// JSON run file with inputs, pipeline and parameters.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// CSV matrices carry a `c0,c1,...` header line.
    #[arg(long, global = true)]
    csv_header: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a sparse, bursty labelled dataset.
    Synth(SynthArgs),
    /// Apply a normalization pipeline to a feature matrix.
    Normalize(NormalizeArgs),
    /// Sample seed rows for approximate rank normalization.
    FitReference(FitReferenceArgs),
    /// Train one-vs-rest linear classifiers.
    Train(TrainArgs),
    /// Score features with a trained model.
    Predict(PredictArgs),
    /// Re-rank a score matrix across classes.
    Rerank(RerankArgs),
    /// Per-class average precision and mAP.
    Evaluate(EvaluateArgs),
    /// Value histogram, per-dimension spread and cosine statistics.
    Stats(StatsArgs),
    /// Run the full normalization and re-ranking comparison.
    Repro(ReproArgs),
}

fn parse_exact(s: &str) -> Result<ExactRanking, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("expected `per_matrix` or `train_reference`, got `{s}`"))
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    /// Number of classes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Feature dimensions.
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p_sparse: Option<f64>,
    #[arg(long)]
    pub burst_dims: Option<usize>,
    #[arg(long)]
    pub burst_scale: Option<f64>,
    #[arg(long)]
    pub signal_strength: Option<f64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Also write a stratified train/test split.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Split seed; defaults to the generator seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Args)]
pub struct NormalizeArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Pipeline JSON file.
    #[arg(long, conflicts_with = "steps")]
    pub pipeline: Option<PathBuf>,
    /// Inline pipeline JSON, e.g. '{"steps":[{"rank_exact":{}},{"l2":{}}]}'.
    #[arg(long)]
    pub steps: Option<String>,
    /// Fit rank steps on this matrix instead of the input.
    #[arg(long)]
    pub fit_on: Option<PathBuf>,
    /// Saved seed reference used by every approximate rank step.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// `per_matrix` or `train_reference`; applies with --fit-on.
    #[arg(long, value_parser = parse_exact)]
    pub exact_ranking: Option<ExactRanking>,
}

#[derive(Args)]
pub struct FitReferenceArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Number of seed rows.
    #[arg(long)]
    pub s: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub model_out: PathBuf,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub init_noise: Option<f64>,
    /// Required when `init_noise` is positive.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct RerankArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Write every intermediate score matrix to this JSON file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Enables cosine statistics.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Directory for CSV copies of the histograms and profile.
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub range_lo: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub range_hi: Option<f64>,
    /// Cosine statistics for this class only.
    #[arg(long)]
    pub class: Option<usize>,
}

#[derive(Args)]
pub struct ReproArgs {
    /// Experiment JSON (same schema as --print-default-config).
    #[arg(long)]
    pub experiment: Option<PathBuf>,
    /// Overrides the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_exact)]
    pub exact_ranking: Option<ExactRanking>,
    /// Report path; defaults to `<output_dir>/repro_report.json`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub print_default_config: bool,
}

fn report(kind: &str, message: &str) {
    let v = serde_json::json!({ "error": kind, "message": message });
    eprintln!("{v}");
}

fn run(cli: Cli) -> rankmir::Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ctx = Ctx { config, csv_header: cli.csv_header };
    par::with_threads(cli.threads, || match &cli.command {
        Command::Synth(a) => commands::synth(&ctx, a),
        Command::Normalize(a) => commands::normalize(&ctx, a),
        Command::FitReference(a) => commands::fit_reference(&ctx, a),
        Command::Train(a) => commands::train(&ctx, a),
        Command::Predict(a) => commands::predict(&ctx, a),
        Command::Rerank(a) => commands::rerank(&ctx, a),
        Command::Evaluate(a) => commands::evaluate(&ctx, a),
        Command::Stats(a) => commands::stats(&ctx, a),
        Command::Repro(a) => commands::repro(&ctx, a),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            report("usage", e.to_string().trim_end());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
