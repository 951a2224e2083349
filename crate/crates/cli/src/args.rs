use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use shannon_core::correlation::CorrelationMethod;
use shannon_core::harness::{CorrelationLevel, DatasetFormat};
use shannon_core::metrics::{MetricKind, Upstream};

use crate::exit;

#[derive(Debug, Parser)]
#[command(
    name = "shannon",
    version,
    about = "Reference-free summary evaluation from language-model surprisal"
)]
#[command(after_help = exit::TABLE)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score one summary against one document.
    Score(ScoreArgs),
    /// Score every summary of a dataset into a resumable JSONL score file.
    Batch(BatchArgs),
    /// Correlate a score file with the human ratings of its dataset.
    Correlate(CorrelateArgs),
    /// Compare reference, word-shuffled and wrong-document summaries.
    Validate(ValidateArgs),
    /// Correlate scores and ratings with extractive summary statistics.
    Bias(BiasArgs),
    /// Render an HTML heatmap of per-token information for one document.
    Viz(VizArgs),
    /// Train the reference n-gram backend and save it as JSON.
    TrainNgram(TrainArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    /// In-process n-gram model with a prompt cache.
    Reference,
    /// HTTP token-logprob server.
    Remote,
    /// Context-free uniform model; the Shannon score is always degenerate.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Json,
    Text,
}

#[derive(Debug, Clone, Default, Args)]
pub struct NGramArgs {
    /// N-gram order of the reference backend.
    #[arg(long)]
    pub ngram_order: Option<usize>,
    /// Add-alpha smoothing constant.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Weight of the prompt cache, in [0, 1).
    #[arg(long)]
    pub cache_weight: Option<f64>,
    /// Cache order: 1 (unigram) or 2 (bigram).
    #[arg(long)]
    pub cache_order: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct BackendArgs {
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Base URL of the remote backend.
    #[arg(long, env = "SHANNON_ENDPOINT")]
    pub endpoint: Option<String>,
    /// Remote request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Remote retries after the first failed attempt.
    #[arg(long)]
    pub retries: Option<usize>,
    /// Trained reference model (from `train-ngram`).
    #[arg(long)]
    pub ngram_model: Option<PathBuf>,
    /// Plain-text training corpus for the reference backend; documents are
    /// separated by blank lines.
    #[arg(long)]
    pub train_corpus: Option<PathBuf>,
    #[command(flatten)]
    pub ngram: NGramArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScoringArgs {
    /// Upstream sentences in each prompt: a count or "all".
    #[arg(long)]
    pub k: Option<Upstream>,
    /// Text between the helper and the upstream sentences ("\n" escapes allowed).
    #[arg(long)]
    pub separator: Option<String>,
    /// Minimum |I(D) - I(D|D)| in nats for the Shannon score to be defined.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Metrics to compute, comma separated.
    #[arg(long, alias = "metric", value_delimiter = ',')]
    pub metrics: Option<Vec<MetricKind>>,
    /// Worker threads.
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Dataset file (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Dataset format; inferred from the first line when omitted.
    #[arg(long)]
    pub dataset_format: Option<DatasetFormat>,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Document text file.
    #[arg(long)]
    pub doc: PathBuf,
    /// Summary text file.
    #[arg(long)]
    pub summary: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct BatchArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Score file to create or resume.
    #[arg(long)]
    pub out: PathBuf,
    /// Process at most this many pending pairs, then stop.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Abort after more than this many consecutive backend failures.
    #[arg(long, default_value_t = 5)]
    pub max_failures: usize,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Score file written by `batch`.
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "system")]
    pub level: CorrelationLevel,
    #[arg(long, default_value = "kendall-tau-b")]
    pub method: CorrelationMethod,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Also write the output here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Seed for the sample, the wrong-summary derangement and the shuffles.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validate a seeded random sample of this many documents.
    #[arg(long)]
    pub sample: Option<usize>,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Also write the output here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BiasArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long, default_value = "kendall-tau-b")]
    pub method: CorrelationMethod,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
    /// Also write the output here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VizArgs {
    /// Document text file.
    #[arg(long)]
    pub doc: PathBuf,
    /// Summary text file; repeat to compare several summaries.
    #[arg(long, required = true)]
    pub summary: Vec<PathBuf>,
    /// Label for each summary, in order; defaults to the file name.
    #[arg(long)]
    pub label: Vec<String>,
    /// Surprisal in nats that gets full color; defaults to the 99th percentile.
    #[arg(long)]
    pub anchor: Option<f64>,
    /// HTML file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Plain-text corpus; documents are separated by blank lines.
    #[arg(long, required_unless_present = "dataset")]
    pub train_corpus: Option<PathBuf>,
    /// Also train on the documents of this dataset.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub dataset_format: Option<DatasetFormat>,
    #[command(flatten)]
    pub ngram: NGramArgs,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
}
