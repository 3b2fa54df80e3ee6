use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CompiledGrammar, Resolver, WeakLabel};
use crate::corpus::store::{read_jsonl, write_jsonl};
use crate::corpus::{CorpusError, ParsedLines, Sentence};
use crate::taxonomy::{ClaimType, LabelCounts};

/// The resolved label of one sentence, with the provenance of the winning
/// candidate. Neutral sentences carry no rule or span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub sentence_id: u64,
    pub claim: ClaimType,
    pub rule_id: Option<usize>,
    pub span: Option<(usize, usize)>,
}

pub type LabelMap = BTreeMap<u64, LabelRecord>;

/// Labels every sentence independently: CKY candidates, then the resolver.
pub fn label_corpus(sentences: &[Sentence], grammar: &CompiledGrammar, resolver: &Resolver) -> LabelMap {
    sentences
        .par_iter()
        .map(|s| {
            let candidates = grammar.cky_match(s.sentence_id, &s.tokens);
            label_record(s.sentence_id, resolver.winner(&candidates))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|r| (r.sentence_id, r))
        .collect()
}

fn label_record(sentence_id: u64, winner: Option<&WeakLabel>) -> LabelRecord {
    match winner {
        Some(w) => LabelRecord {
            sentence_id,
            claim: w.claim,
            rule_id: Some(w.rule_id),
            span: Some(w.span),
        },
        None => LabelRecord {
            sentence_id,
            claim: ClaimType::Neutral,
            rule_id: None,
            span: None,
        },
    }
}

pub fn write_labels(path: &Path, labels: &LabelMap) -> Result<(), CorpusError> {
    let records: Vec<&LabelRecord> = labels.values().collect();
    write_jsonl(path, &records)
}

pub fn read_labels(path: &Path) -> Result<ParsedLines<LabelRecord>, CorpusError> {
    read_jsonl(path, |_: &LabelRecord| true)
}

/// Differences between two labelings of the same corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelabelDiff {
    /// `(sentence_id, before, after)` for every sentence whose claim changed.
    pub changed: Vec<(u64, ClaimType, ClaimType)>,
    pub before: LabelCounts,
    pub after: LabelCounts,
}

impl RelabelDiff {
    /// Sentences missing from one side are compared against Neutral.
    pub fn between(before: &LabelMap, after: &LabelMap) -> Self {
        let claim = |m: &LabelMap, id: &u64| m.get(id).map_or(ClaimType::Neutral, |r| r.claim);
        let mut ids: Vec<u64> = before.keys().chain(after.keys()).copied().collect();
        ids.sort_unstable();
        ids.dedup();
        let changed = ids
            .iter()
            .filter_map(|id| {
                let (a, b) = (claim(before, id), claim(after, id));
                (a != b).then_some((*id, a, b))
            })
            .collect();
        RelabelDiff {
            changed,
            before: LabelCounts::from_labels(before.values().map(|r| &r.claim)),
            after: LabelCounts::from_labels(after.values().map(|r| &r.claim)),
        }
    }

    /// Per-class change in count, omitting unchanged classes.
    pub fn deltas(&self) -> BTreeMap<ClaimType, i64> {
        ClaimType::ALL
            .iter()
            .filter_map(|&c| {
                let d = self.after.get(c) as i64 - self.before.get(c) as i64;
                (d != 0).then_some((c, d))
            })
            .collect()
    }
}
