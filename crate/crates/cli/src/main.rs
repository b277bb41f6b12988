//! `chainkit`: train, apply and compare multi-label classifier chains.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_inference, parse_order, usage, RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "chainkit", version, about = "Multi-label classifier chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write model.txt and metrics.json.
    Train(TrainArgs),
    /// Apply a saved model; writes predictions.csv.
    Predict(PredictArgs),
    /// Score a saved model on labelled data; writes metrics.json.
    Evaluate(EvaluateArgs),
    /// Score the first N lexicographic orders plus BR and their ensemble; writes sweep.csv.
    Sweep(TrainArgs),
    /// Hill-climb over chain orders; writes trials.csv, model.txt and metrics.json.
    Search(TrainArgs),
    /// Compare inference methods on a held-out split; writes bench.csv.
    Bench(TrainArgs),
    /// Write a synthetic dataset CSV.
    Generate(GenerateArgs),
    /// List the recipe presets.
    Presets,
}

#[derive(Args, Clone)]
pub struct DataArgs {
    /// CSV file; the trailing --labels columns are 0/1 labels.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of label columns.
    #[arg(long)]
    pub labels: usize,
    /// The CSV starts with a header row.
    #[arg(long)]
    pub header: bool,
}

#[derive(Args, Clone, Default)]
pub struct RunFlags {
    /// Recipe preset: baseline, kaggler, good-order, neural-net,
    /// neural-net-sparse, sparse-interpretable, expensive-effective.
    #[arg(long)]
    preset: Option<String>,
    /// Flat key=value settings file, applied after the preset.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Extra key=value setting, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// br, cc, ecc, cdn, stacked, two_pass, lp, dynamic.
    #[arg(long)]
    method: Option<String>,
    /// Structure source: order, random, marginal_dep, cond_dep, accuracy, search.
    #[arg(long)]
    structure: Option<String>,
    /// 1-based label order, e.g. 3,1,2.
    #[arg(long)]
    order: Option<String>,
    /// greedy, exhaustive, beam, epsilon.
    #[arg(long)]
    inference: Option<String>,
    /// Beam width.
    #[arg(long)]
    beam: Option<usize>,
    /// Pruning threshold for epsilon inference.
    #[arg(long)]
    epsilon: Option<f64>,
    /// logistic, tree or mixed.
    #[arg(long)]
    learner: Option<String>,
    /// L1 penalty, optionally with its strength.
    #[arg(long, num_args = 0..=1, value_name = "LAMBDA", conflicts_with = "l2")]
    l1: Option<Option<f64>>,
    /// L2 penalty, optionally with its strength.
    #[arg(long, num_args = 0..=1, value_name = "LAMBDA")]
    l2: Option<Option<f64>>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    /// Seed for every random choice in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// exact_match, hamming_accuracy or jaccard.
    #[arg(long)]
    metric: Option<String>,
}

#[derive(Args, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    run: RunFlags,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Add wall-clock timings to the JSON/CSV artifacts (breaks byte-for-byte reproducibility).
    #[arg(long)]
    pub record_timings: bool,
}

#[derive(Args, Clone)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of features, optionally followed by the model's label columns.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub header: bool,
    #[command(flatten)]
    pub inference: InferenceFlags,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Clone)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub inference: InferenceFlags,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Clone, Default)]
pub struct InferenceFlags {
    /// greedy, exhaustive, beam, epsilon (single chains and dynamic ensembles).
    #[arg(long)]
    pub inference: Option<String>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Args, Clone)]
pub struct GenerateArgs {
    /// xor, planted, cascade or independent.
    #[arg(long)]
    pub kind: String,
    /// Rows (replicates of the 4-point grid for xor).
    #[arg(long, default_value_t = 50)]
    pub rows: usize,
    #[arg(long, default_value_t = 4)]
    pub labels: usize,
    #[arg(long, default_value_t = 3)]
    pub features: usize,
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

impl InferenceFlags {
    pub fn resolve(&self) -> Result<chainkit::InferenceConfig, UsageError> {
        let mut cfg = chainkit::InferenceConfig::greedy();
        if let Some(m) = &self.inference {
            cfg.method = parse_inference(m)?;
        }
        if let Some(b) = self.beam {
            cfg.beam_width = b;
        }
        if let Some(e) = self.epsilon {
            cfg.epsilon = e;
        }
        Ok(cfg)
    }
}

impl RunFlags {
    /// Defaults, then preset, then config file, then `--set`, then flags.
    pub fn resolve(&self) -> Result<RunConfig, commands::CliError> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.preset {
            c.apply_preset(p)?;
        }
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| commands::CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
            for (k, v) in chainkit::io::parse_key_values(&text).map_err(|e| usage(e.to_string()))? {
                c.set(&k, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            c.set(k.trim(), v.trim())?;
        }
        if let Some(v) = &self.method {
            c.set("method", v)?;
        }
        if let Some(v) = &self.structure {
            c.set("structure", v)?;
        }
        if let Some(v) = &self.order {
            c.order = Some(parse_order(v)?);
        }
        if let Some(v) = &self.inference {
            c.set("inference", v)?;
        }
        if let Some(v) = self.beam {
            c.inference.beam_width = v;
        }
        if let Some(v) = self.epsilon {
            c.inference.epsilon = v;
        }
        if let Some(v) = &self.learner {
            c.set("learner", v)?;
        }
        if let Some(l) = self.l1 {
            c.learner.regularization = chainkit::Regularization::L1;
            if let Some(v) = l {
                c.learner.lambda = v;
            }
        }
        if let Some(l) = self.l2 {
            c.learner.regularization = chainkit::Regularization::L2;
            if let Some(v) = l {
                c.learner.lambda = v;
            }
        }
        if let Some(v) = self.ensemble_size {
            c.ensemble_size = v;
        }
        if let Some(v) = self.folds {
            c.folds = v;
        }
        if let Some(v) = self.steps {
            c.steps = v;
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.metric {
            c.set("metric", v)?;
        }
        Ok(c)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Train(a) => a.run.resolve().and_then(|c| commands::train(a, c)),
        Command::Predict(a) => commands::predict(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Sweep(a) => a.run.resolve().and_then(|c| commands::sweep(a, c)),
        Command::Search(a) => a.run.resolve().and_then(|c| commands::search(a, c)),
        Command::Bench(a) => a.run.resolve().and_then(|c| commands::bench(a, c)),
        Command::Generate(a) => commands::generate(a),
        Command::Presets => {
            for p in &config::PRESETS {
                println!("{:<22} {:<16} {:<54} {}", p.name, p.inference, p.chains, p.base);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
