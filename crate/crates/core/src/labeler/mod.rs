//! Rule-grammar weak labeling: lexicons, grammar compilation to CNF, CKY
//! matching, conflict resolution and candidate clustering.

mod cky;
mod cluster;
mod compile;
mod grammar;
mod label;
mod resolve;

use thiserror::Error;

pub use cky::WeakLabel;
pub use cluster::{cluster_candidates, Cluster, ClusterError, Clustering};
pub use compile::{CompiledGrammar, SymbolId, SymbolKind};
pub use grammar::{
    GrammarPack, Item, Lexicon, Lexicons, Production, RuleGrammar, DEFAULT_PRIORITY,
    MAX_LEXICON_PHRASE_TOKENS,
};
pub use label::{
    label_corpus, read_labels, write_labels, LabelMap, LabelRecord, RelabelDiff,
};
pub use resolve::{Criterion, Resolver};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("grammar line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
    #[error("invalid lexicon phrase {0:?}")]
    InvalidPhrase(String),
    #[error("production {rule} for {lhs} is empty")]
    EmptyProduction { rule: usize, lhs: String },
    #[error("unknown lexicon @{0}")]
    UnknownLexicon(String),
    #[error("lexicon @{0} has no entries")]
    EmptyLexicon(String),
    #[error("undefined nonterminal {0}")]
    UndefinedSymbol(String),
}
