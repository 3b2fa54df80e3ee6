//! Stratified splits, macro-averaged metrics, hyperparameter search and the
//! experiment grid.

mod experiment;
mod metrics;
mod search;
mod split;

use thiserror::Error;

pub use experiment::{
    evaluate_bundles, model_names, report_name, run_experiment, top_ngrams, ExperimentConfig, ExperimentOutcome, LabeledCorpus, Report, ReportRow, Task,
    MACRO_ROW,
};
pub use metrics::{metrics, ClassMetrics, MetricsReport};
pub use search::{search, write_trial_log, SearchResult, SearchSpace, Trial, TrialStatus};
pub use split::{stratified_split, Split, SplitConfig};

use crate::models::{Family, ModelError, Strategy};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("class {class:?} has {count} instances; at least 3 are needed to split")]
    ClassTooSmall { class: String, count: usize },
    #[error("invalid split fractions: {0}")]
    SplitConfig(String),
    #[error("gold and predicted labels differ in length ({gold} vs {predicted})")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("no labels to evaluate")]
    Empty,
    #[error("label {0:?} is not in the class list")]
    UnknownLabel(String),
    #[error("search budget must be at least 1")]
    Budget,
    #[error("invalid search range for {0}")]
    Range(&'static str),
    #[error("all {0} search trials failed")]
    AllTrialsFailed(usize),
    #[error("task {task} does not support {strategy:?} with {family:?}")]
    Mismatch { task: Task, strategy: Strategy, family: Family },
    #[error("task {task} has {expected} sections but {got} bundles were given")]
    SectionCount { task: Task, expected: usize, got: usize },
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
