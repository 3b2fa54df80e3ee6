use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Sentence};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub similarity_threshold: f64,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig { similarity_threshold: 0.95 }
    }
}

impl DedupConfig {
    pub fn new(similarity_threshold: f64) -> Result<Self, CorpusError> {
        if similarity_threshold > 0.0 && similarity_threshold <= 1.0 {
            Ok(DedupConfig { similarity_threshold })
        } else {
            Err(CorpusError::Threshold(similarity_threshold))
        }
    }
}

fn normalize(text: &str) -> Vec<char> {
    let lowered = text.to_lowercase();
    let mut out = Vec::with_capacity(lowered.len());
    for word in lowered.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars());
    }
    out
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(diag + 1);
        }
    }
    row[b.len()]
}

/// Distance if it is at most `k`, computed in a diagonal band of width `2k+1`.
fn levenshtein_within(a: &[char], b: &[char], k: usize) -> Option<usize> {
    let (n, m) = (a.len(), b.len());
    if n.abs_diff(m) > k {
        return None;
    }
    let inf = usize::MAX / 2;
    let mut prev = vec![inf; m + 1];
    for (j, v) in prev.iter_mut().enumerate().take(k.min(m) + 1) {
        *v = j;
    }
    let mut cur = vec![inf; m + 1];
    for i in 1..=n {
        let lo = i.saturating_sub(k);
        let hi = (i + k).min(m);
        if lo > 0 {
            cur[lo - 1] = inf;
        }
        let mut row_min = inf;
        for j in lo..=hi {
            let v = if j == 0 {
                i
            } else {
                let sub = prev[j - 1] + usize::from(a[i - 1] != b[j - 1]);
                sub.min(prev[j] + 1).min(cur[j - 1] + 1)
            };
            cur[j] = v;
            row_min = row_min.min(v);
        }
        if hi < m {
            cur[hi + 1] = inf;
        }
        if row_min > k {
            return None;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let d = prev[m];
    (d <= k).then_some(d)
}

fn similarity_from(distance: usize, max_len: usize) -> f64 {
    if max_len == 0 {
        1.0
    } else {
        1.0 - distance as f64 / max_len as f64
    }
}

/// Normalized edit similarity `1 - distance / max_len` over lowercased,
/// whitespace-collapsed text. Two empty strings are identical.
pub fn similarity(a: &Sentence, b: &Sentence) -> f64 {
    text_similarity(&a.text, &b.text)
}

pub(crate) fn text_similarity(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize(a), normalize(b));
    similarity_from(levenshtein(&a, &b), a.len().max(b.len()))
}

/// Largest distance `d` with `1 - d/len > threshold`, or `None` if even an
/// exact match is not above the threshold.
fn max_distance(len: usize, threshold: f64) -> Option<usize> {
    if similarity_from(0, len) <= threshold {
        return None;
    }
    if len == 0 {
        return Some(0);
    }
    let mut k = ((1.0 - threshold) * len as f64).floor() as usize;
    k = k.min(len);
    while k > 0 && similarity_from(k, len) <= threshold {
        k -= 1;
    }
    while k < len && similarity_from(k + 1, len) > threshold {
        k += 1;
    }
    Some(k)
}

const BINS: usize = 64;

struct Entry {
    chars: Vec<char>,
    hist: [u16; BINS],
}

impl Entry {
    fn new(text: &str) -> Self {
        let chars = normalize(text);
        let mut hist = [0u16; BINS];
        for &c in &chars {
            let bin = c as usize % BINS;
            hist[bin] = hist[bin].saturating_add(1);
        }
        Entry { chars, hist }
    }

    /// Lower bound on edit distance from binned character counts.
    fn bag_bound(&self, other: &Entry) -> usize {
        let (mut more, mut less) = (0usize, 0usize);
        for (x, y) in self.hist.iter().zip(other.hist.iter()) {
            if x > y {
                more += usize::from(x - y);
            } else {
                less += usize::from(y - x);
            }
        }
        more.max(less)
    }

    fn is_near(&self, other: &Entry, threshold: f64) -> bool {
        let max_len = self.chars.len().max(other.chars.len());
        let Some(k) = max_distance(max_len, threshold) else {
            return false;
        };
        if self.chars.len().abs_diff(other.chars.len()) > k || self.bag_bound(other) > k {
            return false;
        }
        match levenshtein_within(&self.chars, &other.chars, k) {
            Some(d) => similarity_from(d, max_len) > threshold,
            None => false,
        }
    }
}

/// Greedy near-duplicate removal.
///
/// Sentences are visited in `sentence_id` order; a sentence is dropped when its
/// similarity to an already retained sentence is strictly above the threshold.
/// The survivors are returned in their input order.
pub fn dedup(sentences: &[Sentence], cfg: &DedupConfig) -> Vec<Sentence> {
    let threshold = cfg.similarity_threshold;
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    order.sort_by_key(|&i| (sentences[i].sentence_id, i));

    let mut exact: HashSet<Vec<char>> = HashSet::new();
    let mut by_len: BTreeMap<usize, Vec<Entry>> = BTreeMap::new();
    let mut keep = vec![false; sentences.len()];

    for i in order {
        let entry = Entry::new(&sentences[i].text);
        let len = entry.chars.len();
        if threshold < 1.0 && exact.contains(&entry.chars) {
            continue;
        }
        let lo = match max_distance(len, threshold) {
            Some(k) => len - k,
            None => len,
        };
        let hi = ((len as f64 / threshold).ceil() as usize).saturating_add(1);
        let duplicate = by_len
            .range(lo..=hi)
            .flat_map(|(_, entries)| entries.iter())
            .collect::<Vec<_>>()
            .par_iter()
            .any(|other| entry.is_near(other, threshold));
        if duplicate {
            continue;
        }
        keep[i] = true;
        exact.insert(entry.chars.clone());
        by_len.entry(len).or_default().push(entry);
    }

    sentences
        .iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(s, _)| s.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: u64, text: &str) -> Sentence {
        Sentence::new(id, "c", id as usize, text)
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(text_similarity("identical", "identical"), 1.0);
        assert_eq!(text_similarity("abcd", "abce"), 0.75);
        assert_eq!(text_similarity("aaaa", "bbbb"), 0.0);
        assert_eq!(text_similarity("", ""), 1.0);
        assert_eq!(text_similarity("Hello   World", "hello world"), 1.0);
    }

    #[test]
    fn banded_distance_matches_full() {
        let pairs = [("kitten", "sitting"), ("", "abc"), ("abc", ""), ("flaw", "lawn"), ("same", "same")];
        for (a, b) in pairs {
            let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
            let d = levenshtein(&a, &b);
            for k in 0..8 {
                assert_eq!(levenshtein_within(&a, &b, k), (d <= k).then_some(d), "{a:?} {b:?} {k}");
            }
        }
    }

    #[test]
    fn max_distance_is_tight() {
        for len in 0..200 {
            for &t in &[0.5, 0.8, 0.9, 0.95, 0.99, 1.0] {
                match max_distance(len, t) {
                    None => assert!(similarity_from(0, len) <= t),
                    Some(k) => {
                        assert!(similarity_from(k, len) > t);
                        assert!(k == len || similarity_from(k + 1, len) <= t);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_duplicates_collapse() {
        let out = dedup(&[s(0, "Same sentence here."), s(1, "Same sentence here.")], &DedupConfig::default());
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].sentence_id, 0);
    }

    #[test]
    fn threshold_one_keeps_everything() {
        let input = [s(0, "dup"), s(1, "dup")];
        assert_eq!(dedup(&input, &DedupConfig::new(1.0).unwrap()).len(), 2);
    }

    #[test]
    fn config_validation() {
        assert!(DedupConfig::new(0.0).is_err());
        assert!(DedupConfig::new(1.5).is_err());
        assert!(DedupConfig::new(0.95).is_ok());
    }

    #[test]
    fn first_by_id_wins_and_order_is_preserved() {
        let input = [s(5, "zzz unique"), s(3, "hello there friend"), s(1, "Hello there friend")];
        let out = dedup(&input, &DedupConfig::default());
        let ids: Vec<u64> = out.iter().map(|s| s.sentence_id).collect();
        assert_eq!(ids, vec![5, 1]);
    }
}
