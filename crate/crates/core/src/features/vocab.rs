use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, ngrams, FeatureError};

pub const DEFAULT_VOCAB_CAP: usize = 30_000;

/// The most frequent training n-grams, indexed by frequency rank.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<(String, u64)>", into = "Vec<(String, u64)>")]
pub struct NgramVocab {
    /// `(ngram, training frequency)` in index order.
    entries: Vec<(String, u64)>,
    index: HashMap<String, u32>,
}

impl From<Vec<(String, u64)>> for NgramVocab {
    fn from(entries: Vec<(String, u64)>) -> Self {
        let index = entries.iter().enumerate().map(|(i, (g, _))| (g.clone(), i as u32)).collect();
        NgramVocab { entries, index }
    }
}

impl From<NgramVocab> for Vec<(String, u64)> {
    fn from(v: NgramVocab) -> Self {
        v.entries
    }
}

/// Counts unigrams and bigrams over the training sentences and keeps the
/// `cap` most frequent, ordered by frequency descending then lexicographically.
pub fn build_vocab(train: &[Vec<String>], cap: usize) -> NgramVocab {
    let counts = train
        .par_iter()
        .fold(HashMap::<String, u64>::new, |mut acc, tokens| {
            for g in ngrams(tokens) {
                *acc.entry(g).or_default() += 1;
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (g, n) in b {
                *a.entry(g).or_default() += n;
            }
            a
        });
    let mut entries: Vec<(String, u64)> = counts.into_iter().collect();
    entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(cap);
    NgramVocab::from(entries)
}

impl NgramVocab {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, ngram: &str) -> Option<u32> {
        self.index.get(ngram).copied()
    }

    pub fn ngram(&self, index: u32) -> Option<&str> {
        self.entries.get(index as usize).map(|(g, _)| g.as_str())
    }

    pub fn frequency(&self, index: u32) -> Option<u64> {
        self.entries.get(index as usize).map(|&(_, n)| n)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str, u64)> {
        self.entries.iter().enumerate().map(|(i, (g, n))| (i as u32, g.as_str(), *n))
    }

    /// `ngram<TAB>index<TAB>frequency`, one line per entry in index order.
    pub fn to_tsv(&self) -> String {
        self.iter().map(|(i, g, n)| format!("{g}\t{i}\t{n}\n")).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        let mut f = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
        f.write_all(self.to_tsv().as_bytes()).map_err(|e| io_err(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        let parse_err = |line: usize, message: String| FeatureError::Parse {
            path: path.display().to_string(),
            line,
            message,
        };
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [g, i, f] = fields[..] else {
                return Err(parse_err(n + 1, "expected 3 tab-separated fields".into()));
            };
            let i: usize = i.parse().map_err(|_| parse_err(n + 1, format!("bad index {i:?}")))?;
            if i != entries.len() {
                return Err(parse_err(n + 1, format!("index {i} out of order")));
            }
            let f: u64 = f.parse().map_err(|_| parse_err(n + 1, format!("bad frequency {f:?}")))?;
            entries.push((g.to_string(), f));
        }
        Ok(NgramVocab::from(entries))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn frequency_then_lexicographic() {
        let v = build_vocab(&[tokenize("a b"), tokenize("a c")], 2);
        assert_eq!(v.iter().map(|(_, g, _)| g).collect::<Vec<_>>(), vec!["a", "a b"]);
        assert_eq!(v.frequency(0), Some(2));
    }

    #[test]
    fn cap_larger_than_distinct_keeps_all() {
        let v = build_vocab(&[tokenize("a b"), tokenize("a c"), vec![]], 100);
        assert_eq!(v.len(), 5);
        assert_eq!(v.iter().map(|(_, g, _)| g).collect::<Vec<_>>(), vec!["a", "a b", "a c", "b", "c"]);
    }

    #[test]
    fn tsv_round_trip() {
        let v = build_vocab(&[tokenize("x y z"), tokenize("y z")], 10);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.tsv");
        v.save(&p).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("y\t0\t2\ny z\t1\t2\nz\t2\t2\n"));
        assert_eq!(NgramVocab::load(&p).unwrap(), v);
    }
}
