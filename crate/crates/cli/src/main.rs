//! `claimgram` command-line pipeline.
//!
//! Stages read and write a fixed workspace layout, so they compose in order:
//! ingest, segment, dedup, label, split, train, evaluate.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use claimgram_core::corpus::CorpusError;
use claimgram_core::eval::EvalError;
use claimgram_core::labeler::{ClusterError, GrammarError};
use claimgram_core::models::ModelError;

#[derive(Debug, Parser)]
#[command(name = "claimgram", version, about = "Weak labeling and claim classification for public comments")]
pub struct Cli {
    /// Workspace directory; created if missing.
    #[arg(short, long, global = true, default_value = ".")]
    pub workspace: PathBuf,
    /// Seed for every random choice (splits, search, training, clustering).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Grammar pack directory [default: <workspace>/grammar, else the built-in seed pack].
    #[arg(long, global = true)]
    pub grammar: Option<PathBuf>,
    /// Word vectors in text format [default: <workspace>/corpus/vectors.txt if present].
    #[arg(long, global = true)]
    pub vectors: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Collect comments from a JSON-lines file or a paged comment API.
    Ingest(IngestArgs),
    /// Split comments into sentences.
    Segment,
    /// Drop near-duplicate sentences.
    Dedup(DedupArgs),
    /// Weakly label sentences with the grammar.
    Label,
    /// Cluster sentences for grammar review.
    Cluster(ClusterArgs),
    /// Stratified train/dev/test split of the labeled sentences.
    Split(SplitArgs),
    /// Tune, train and save models for one experiment cell.
    Train(TrainArgs),
    /// Score saved models on the test split.
    Evaluate(CellArgs),
    /// Classify sentences with a saved model.
    Predict(PredictArgs),
    /// Print the highest weighted n-grams of a class.
    InspectWeights(InspectArgs),
    /// Run the HTTP service over the workspace.
    Serve(ServeArgs),
    /// Write a synthetic planted-cue corpus, grammar and vectors.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Comments file (JSON lines).
    #[arg(long, conflicts_with = "api_base", required_unless_present = "api_base")]
    pub input: Option<PathBuf>,
    /// Base URL of a JSON:API comment endpoint.
    #[arg(long)]
    pub api_base: Option<String>,
    /// Docket to fetch; repeatable.
    #[arg(long = "docket", requires = "api_base")]
    pub dockets: Vec<String>,
    /// Environment variable holding the API key.
    #[arg(long, default_value = "REGULATIONS_API_KEY")]
    pub api_key_env: String,
    /// Header carrying the API key.
    #[arg(long, default_value = "X-Api-Key")]
    pub api_key_header: String,
    /// Request rate limit.
    #[arg(long, default_value_t = 1.0)]
    pub requests_per_second: f64,
    /// Keep dockets with more than this many comments.
    #[arg(long)]
    pub min_comments: Option<usize>,
    /// Keep dockets with fewer than this many comments.
    #[arg(long)]
    pub max_comments: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    /// Pairs more similar than this are duplicates.
    #[arg(long, default_value_t = 0.95)]
    pub threshold: f64,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Label to cluster, or `all`.
    #[arg(long, default_value = "Neutral")]
    pub pool: String,
    /// Exemplars reported per cluster.
    #[arg(long, default_value_t = 5)]
    pub exemplars: usize,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, default_value_t = 0.70)]
    pub train: f64,
    #[arg(long, default_value_t = 0.15)]
    pub dev: f64,
    #[arg(long, default_value_t = 0.15)]
    pub test: f64,
}

#[derive(Debug, Args)]
pub struct CellArgs {
    /// claim-id-balanced, claim-id-imbalanced, stance, claim-neutral,
    /// supp-v-opp, claim+neutral or claim+ensemble.
    #[arg(long)]
    pub task: String,
    /// flat, two_stage, hierarchical or ensemble.
    #[arg(long, default_value = "flat")]
    pub strategy: String,
    /// log_reg or fast_text.
    #[arg(long, default_value = "log_reg")]
    pub family: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    /// Random-search trials per model.
    #[arg(long, default_value_t = 8)]
    pub budget: usize,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model name under <workspace>/models.
    #[arg(long)]
    pub model: String,
    /// Sentence store (JSON lines) to classify.
    #[arg(long, conflicts_with = "text", required_unless_present = "text")]
    pub input: Option<PathBuf>,
    /// Sentence to classify; repeatable.
    #[arg(long)]
    pub text: Vec<String>,
    /// Output file [default: stdout].
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Model name under <workspace>/models.
    #[arg(long, default_value = "claim+neutral-flat-log_reg")]
    pub model: String,
    /// Component of a multi-model strategy, e.g. claim_type.
    #[arg(long)]
    pub component: Option<String>,
    #[arg(long)]
    pub class: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: std::net::SocketAddr,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20_000)]
    pub sentences: usize,
    #[arg(long, default_value_t = 0.85)]
    pub neutral_fraction: f64,
    /// Rate of injected exact and near duplicates.
    #[arg(long, default_value_t = 0.05)]
    pub duplicate_rate: f64,
}

/// Failures with a dedicated exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("missing input {}", .0.display())]
    MissingInput(PathBuf),
    #[error("{0}")]
    Invalid(String),
}

fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    const MISSING: (u8, &str) = (2, "missing_input");
    const INVALID: (u8, &str) = (3, "invalid");
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::MissingInput(_) => MISSING,
                Failure::Invalid(_) => INVALID,
            };
        }
        if let Some(CorpusError::Threshold(_)) = cause.downcast_ref::<CorpusError>() {
            return INVALID;
        }
        if cause.downcast_ref::<GrammarError>().is_some() || cause.downcast_ref::<ClusterError>().is_some() {
            return INVALID;
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            if !matches!(e, EvalError::Io { .. } | EvalError::Model(_)) {
                return INVALID;
            }
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            if !matches!(e, ModelError::Io { .. } | ModelError::Format(_) | ModelError::NonFinite(_)) {
                return INVALID;
            }
        }
    }
    (1, "failed")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = classify(&err);
            eprintln!("{}", json!({ "error": kind, "message": format!("{err:#}") }));
            ExitCode::from(code)
        }
    }
}
