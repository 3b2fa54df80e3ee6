//! Comment ingestion, sentence segmentation and near-duplicate removal.

mod dedup;
mod fetch;
mod segment;
pub(crate) mod store;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use dedup::{dedup, levenshtein, similarity, DedupConfig};
pub use fetch::{fetch_comments, ApiSource, DocketFilter, FetchReport, Source};
pub use segment::{segment_corpus, segment_sentences};
pub use store::{read_comments, read_sentences, write_comments, write_sentences, ParsedLines};
pub use tokenize::tokenize;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {source_name}: {message}")]
    Fetch {
        source_name: String,
        message: String,
        retryable: bool,
    },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid dedup threshold {0}: must be in (0, 1]")]
    Threshold(f64),
}

impl CorpusError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, CorpusError::Fetch { retryable: true, .. })
    }
}

/// A single public comment as submitted to a docket.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub comment_id: String,
    pub docket_id: String,
    #[serde(default)]
    pub agency: String,
    pub text: String,
    #[serde(default)]
    pub received_at: Option<String>,
}

/// A sentence-level unit of comment text.
///
/// `tokens` is always derived from `text` with [`tokenize`] and is not part of
/// the on-disk sentence store.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: u64,
    pub comment_id: String,
    pub index_in_comment: usize,
    pub text: String,
    #[serde(skip)]
    pub tokens: Vec<String>,
}

impl Sentence {
    pub fn new(
        sentence_id: u64,
        comment_id: impl Into<String>,
        index_in_comment: usize,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Sentence {
            sentence_id,
            comment_id: comment_id.into(),
            index_in_comment,
            text,
            tokens,
        }
    }

    /// Restores `tokens` after deserialization.
    pub fn retokenize(&mut self) {
        self.tokens = tokenize(&self.text);
    }
}
