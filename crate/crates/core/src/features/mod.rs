//! Classifier inputs: binary n-gram presence over a capped vocabulary, SIF
//! sentence embeddings and hashed n-gram buckets.

mod embedding;
mod hashed;
mod pca;
mod vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use embedding::{EmbeddingTable, DEFAULT_SIF_A};
pub use hashed::{fnv1a64, hashed_avg_embed, hashed_buckets, BucketMatrix, DEFAULT_BUCKETS};
pub use pca::fit_principal_component;
pub use vocab::{build_vocab, NgramVocab, DEFAULT_VOCAB_CAP};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("empty embedding table")]
    EmptyTable,
}

/// Unigrams in order, then bigrams joined by a single space.
pub fn ngrams(tokens: &[String]) -> Vec<String> {
    let mut out: Vec<String> = tokens.to_vec();
    out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

/// Sparse binary n-gram presence plus an optional dense block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Sorted, distinct vocabulary indices.
    pub sparse: Vec<u32>,
    pub dense: Option<Vec<f64>>,
}

impl FeatureVector {
    pub fn dense_width(&self) -> usize {
        self.dense.as_ref().map_or(0, Vec::len)
    }
}

/// Width of the hashed fallback in [`pool_embeddings`].
pub const POOL_HASHED_DIM: usize = 32;

/// Sentence vectors for clustering a pool: SIF over `table` with the
/// principal component refit on the pool, or averaged hashed n-gram vectors
/// when no table is available.
pub fn pool_embeddings(pool: &[Vec<String>], table: Option<&EmbeddingTable>, seed: u64) -> Vec<Vec<f64>> {
    match table {
        Some(t) => {
            let mut t = t.clone();
            t.fit(pool);
            pool.iter().map(|s| t.sif_embed(s)).collect()
        }
        None => {
            let matrix = BucketMatrix::new(POOL_HASHED_DIM, DEFAULT_BUCKETS, seed, 1.0);
            pool.iter().map(|s| hashed_avg_embed(s, &matrix)).collect()
        }
    }
}

pub fn featurize(tokens: &[String], vocab: &NgramVocab, emb: Option<&EmbeddingTable>) -> FeatureVector {
    let mut sparse: Vec<u32> = ngrams(tokens).iter().filter_map(|g| vocab.index_of(g)).collect();
    sparse.sort_unstable();
    sparse.dedup();
    FeatureVector {
        sparse,
        dense: emb.map(|e| e.sif_embed(tokens)),
    }
}

pub(crate) fn io_err(path: &std::path::Path, source: std::io::Error) -> FeatureError {
    FeatureError::Io {
        path: path.display().to_string(),
        source,
    }
}
