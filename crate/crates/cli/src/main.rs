//! Command-line entry point for the `requery` pipeline.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] requery::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) | CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "requery", version, about = "Repetition-based recovery of misrecognized spoken queries")]
pub struct Cli {
    /// Plain-text key=value file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

/// Pronunciation lexicon and phone confusion matrix.
#[derive(Debug, Args)]
pub struct Resources {
    /// Lexicon file (`word PH ON ES` per line); the bundled toy lexicon if absent.
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Confusion-matrix CSV; the built-in feature matrix if absent.
    #[arg(long, value_name = "FILE")]
    pub matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Engine {
    Rule,
    #[value(name = "2sa")]
    TwoStep,
    Ptr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NeuralEngine {
    #[value(name = "2sa")]
    TwoStep,
    Ptr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic two-turn corpus as JSONL.
    GenData(GenDataArgs),
    /// Train the acoustic-neighbour embedding.
    AneTrain(AneTrainArgs),
    /// List the nearest vocabulary words to a word in embedding space.
    AneNearest(AneNearestArgs),
    /// Embedding commands under one name.
    #[command(subcommand)]
    Ane(AneCommand),
    /// Train a neural rewriter.
    Train(TrainArgs),
    /// Rewrite one pair of turns.
    Rewrite(RewriteArgs),
    /// Sweep trigger thresholds over a corpus and emit the WERR/FAR curve.
    Evaluate(EvaluateArgs),
    /// Print the built-in confusion matrix as CSV.
    #[command(alias = "default_matrix")]
    DefaultMatrix(DefaultMatrixArgs),
    /// Finite-difference gradient checks of every trainable component.
    GradCheck(GradCheckArgs),
}

#[derive(Debug, Subcommand)]
pub enum AneCommand {
    Train(AneTrainArgs),
    Nearest(AneNearestArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub resources: Resources,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Reference utterances, one per line; template-generated if absent.
    #[arg(long, value_name = "FILE")]
    pub references: Option<PathBuf>,
    /// Number of template references when `--references` is absent.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub correction_proportion: Option<f64>,
    #[arg(long)]
    pub corruption_rate: Option<f64>,
    #[arg(long)]
    pub prefix_prob: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AneTrainArgs {
    #[command(flatten)]
    pub resources: Resources,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub char_dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub margin: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AneNearestArgs {
    pub word: String,
    #[command(flatten)]
    pub resources: Resources,
    /// Embedding checkpoint, or a rewriter checkpoint bundling one.
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    #[arg(short, long)]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub engine: NeuralEngine,
    #[command(flatten)]
    pub resources: Resources,
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    /// Trained embedding checkpoint.
    #[arg(long, value_name = "FILE")]
    pub ane: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RewriteArgs {
    pub first: String,
    pub followup: String,
    #[arg(long, value_enum, default_value = "rule")]
    pub engine: Engine,
    #[command(flatten)]
    pub resources: Resources,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Report whether the trigger fires at this threshold.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long, value_enum)]
    pub engine: Engine,
    #[command(flatten)]
    pub resources: Resources,
    #[arg(long, value_name = "FILE")]
    pub corpus: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub checkpoint: Option<PathBuf>,
    /// Comma-separated thresholds; 0, 0.05, ..., 2 if absent.
    #[arg(long, value_name = "LIST")]
    pub thresholds: Option<String>,
    /// Curve output; standard output if absent.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub beam: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DefaultMatrixArgs {
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub instances: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
