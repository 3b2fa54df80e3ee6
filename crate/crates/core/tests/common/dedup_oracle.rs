use claimgram_core::corpus::Sentence;
use rand::seq::SliceRandom;
use rand::Rng;

fn normalized(text: &str) -> String {
    text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn oracle_similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&normalized(a), &normalized(b))
}

/// Quadratic greedy dedup: visit by id, keep a sentence unless some kept
/// sentence is strictly above the threshold.
pub fn greedy(sentences: &[Sentence], threshold: f64) -> Vec<Sentence> {
    let mut order: Vec<&Sentence> = sentences.iter().collect();
    order.sort_by_key(|s| s.sentence_id);
    let mut kept: Vec<&Sentence> = Vec::new();
    for s in order {
        if kept.iter().all(|k| oracle_similarity(&k.text, &s.text) <= threshold) {
            kept.push(s);
        }
    }
    let ids: std::collections::HashSet<u64> = kept.iter().map(|s| s.sentence_id).collect();
    sentences.iter().filter(|s| ids.contains(&s.sentence_id)).cloned().collect()
}

const WORDS: [&str; 8] = ["the", "rule", "is", "too", "costly", "we", "oppose", "it"];

/// Random corpus rich in near duplicates: sentences are drawn from a few
/// templates and then lightly edited.
pub fn random_corpus(rng: &mut impl Rng, max_len: usize) -> Vec<Sentence> {
    let n = rng.gen_range(0..=max_len);
    let templates: Vec<String> = (0..rng.gen_range(1..6))
        .map(|_| {
            (0..rng.gen_range(1..12))
                .map(|_| *WORDS.choose(rng).unwrap())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut chars: Vec<char> = templates.choose(rng).unwrap().chars().collect();
            for _ in 0..rng.gen_range(0..3) {
                match rng.gen_range(0..4) {
                    0 if !chars.is_empty() => {
                        let at = rng.gen_range(0..chars.len());
                        chars.remove(at);
                    }
                    1 => chars.insert(rng.gen_range(0..=chars.len()), 'x'),
                    2 if !chars.is_empty() => {
                        let at = rng.gen_range(0..chars.len());
                        chars[at] = chars[at].to_ascii_uppercase();
                    }
                    _ => chars.push(' '),
                }
            }
            let text: String = chars.into_iter().collect();
            Sentence::new(rng.gen_range(0..1000) * 1000 + i as u64, "c", i, text)
        })
        .collect()
}
