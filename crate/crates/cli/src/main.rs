//! `warnpath` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 parse error, 3 data or format
//! error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use warnpath::encoder::Hyperparams;
use warnpath::paths::PathBudget;
use warnpath::retrieval::Bm25Params;
use warnpath::tokens::Truncate;
use warnpath::{Exec, Label};

#[derive(Debug, Parser)]
#[command(name = "warnpath", version, about = "Path-based static analysis warning identification")]
struct Cli {
    /// Run every data-parallel stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus of labeled bad/good function pairs.
    GenCorpus(GenCorpusArgs),
    /// Turn warning reports into abstract token instances.
    Extract(ExtractArgs),
    /// Pick BM25-similar labeled source instances for every target.
    Select(SelectArgs),
    /// Train the encoder classifier and save a model archive.
    Train(TrainArgs),
    /// Predict labels for target instances with a trained model.
    Identify(IdentifyArgs),
    /// Clean-class precision and recall of predictions.
    Evaluate(EvaluateArgs),
    /// Compare two results tables.
    Stats(StatsArgs),
    /// Repeated stratified k-fold evaluation of the encoder.
    Crossval(CrossvalArgs),
}

#[derive(Debug, Args)]
struct GenCorpusArgs {
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Templates to cycle through (default: all).
    #[arg(long, value_delimiter = ',')]
    templates: Vec<warnpath::generate::Template>,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    /// Directory the report's `file` fields are relative to.
    #[arg(long)]
    sources: PathBuf,
    #[arg(long)]
    warnings: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    /// Project name stored in every instance.
    #[arg(long, default_value = "")]
    project: String,
    #[arg(long, default_value_t = PathBudget::default().max_back_edge_uses)]
    max_back_edges: u32,
    #[arg(long, default_value_t = PathBudget::default().max_paths)]
    max_paths: usize,
    /// Also write one DOT file per function that has a warning.
    #[arg(long, value_name = "DIR")]
    emit_cfg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[arg(long)]
    source: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(short = 'n', default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = Bm25Params::default().k1)]
    k1: f64,
    #[arg(long, default_value_t = Bm25Params::default().b)]
    b: f64,
    /// Label chosen when the top-(2n+1) vote is even.
    #[arg(long, default_value = "clean", value_parser = parse_label)]
    tie: Label,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = Hyperparams::default().num_layers)]
    layers: usize,
    #[arg(long, default_value_t = Hyperparams::default().d_model)]
    d_model: usize,
    #[arg(long, default_value_t = Hyperparams::default().num_heads)]
    heads: usize,
    #[arg(long, default_value_t = Hyperparams::default().d_ff)]
    d_ff: usize,
    #[arg(long, default_value_t = Hyperparams::default().max_len)]
    max_len: usize,
    #[arg(long, default_value_t = Hyperparams::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = Hyperparams::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = Hyperparams::default().max_epochs)]
    epochs: usize,
    #[arg(long, default_value_t = Hyperparams::default().patience)]
    patience: usize,
    #[arg(long, default_value_t = Hyperparams::default().val_fraction)]
    val_fraction: f64,
    /// Which end of an over-long sequence to drop: `tail` or `head`.
    #[arg(long, default_value = "tail")]
    truncate: Truncate,
}

impl ModelArgs {
    fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            num_layers: self.layers,
            d_model: self.d_model,
            num_heads: self.heads,
            d_ff: self.d_ff,
            max_len: self.max_len,
            batch_size: self.batch_size,
            learning_rate: self.lr,
            max_epochs: self.epochs,
            patience: self.patience,
            val_fraction: self.val_fraction,
            seed: self.seed,
            ln_epsilon: Hyperparams::default().ln_epsilon,
            truncate: self.truncate,
        }
    }
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    /// Model archive to write; the training log goes to `<out>.log.json`.
    #[arg(short, long)]
    out: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Debug, Args)]
struct IdentifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    target: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    labeled: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StatsArgs {
    table_a: PathBuf,
    table_b: PathBuf,
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CrossvalArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2)]
    folds: usize,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    /// Value of the `method` column.
    #[arg(long, default_value = "warnpath")]
    method: String,
    #[command(flatten)]
    model: ModelArgs,
}

fn parse_label(s: &str) -> Result<Label, String> {
    match s {
        "clean" | "0" => Ok(Label::Clean),
        "buggy" | "1" => Ok(Label::Buggy),
        _ => Err(format!("expected `clean` or `buggy`, got `{s}`")),
    }
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let exec = if cli.sequential { Exec::Sequential } else { Exec::default() };
    let result = match cli.command {
        Command::GenCorpus(a) => commands::gen_corpus(a),
        Command::Extract(a) => commands::extract(a, exec),
        Command::Select(a) => commands::select(a, exec),
        Command::Train(a) => commands::train(a, exec),
        Command::Identify(a) => commands::identify(a, exec),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Stats(a) => commands::stats(a),
        Command::Crossval(a) => commands::crossval(a, exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
