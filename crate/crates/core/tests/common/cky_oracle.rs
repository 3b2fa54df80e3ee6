//! Brute-force rule matcher that works on the source grammar directly, plus
//! a generator of small random acyclic grammars.

use std::collections::{BTreeMap, HashMap};

use claimgram_core::labeler::{Item, Lexicon, Lexicons, RuleGrammar};
use claimgram_core::taxonomy::ClaimType;
use rand::seq::SliceRandom;
use rand::Rng;

pub const VOCAB: [&str; 5] = ["a", "b", "c", "d", "e"];
const CLAIMS: [&str; 3] = ["BURDENSOME", "OVERREACH", "TOO_BROAD"];

struct Matcher<'a> {
    grammar: &'a RuleGrammar,
    lexicons: &'a Lexicons,
    tokens: &'a [String],
    memo: HashMap<(String, usize, usize), bool>,
}

impl Matcher<'_> {
    fn seq(&mut self, items: &[Item], start: usize, end: usize) -> bool {
        let Some((first, rest)) = items.split_first() else {
            return start == end;
        };
        (start..=end).any(|mid| self.item(first, start, mid) && self.seq(rest, mid, end))
    }

    fn item(&mut self, item: &Item, start: usize, end: usize) -> bool {
        let span = &self.tokens[start..end];
        match item {
            Item::Phrase(p) => span == p.as_slice(),
            Item::Gap(n) => span.len() <= *n,
            Item::Lexicon(name) => self.lexicons[name]
                .entries
                .iter()
                .any(|e| e.split(' ').eq(span.iter().map(String::as_str))),
            Item::NonTerminal(name) => self.symbol(name, start, end),
        }
    }

    fn symbol(&mut self, name: &str, start: usize, end: usize) -> bool {
        let key = (name.to_string(), start, end);
        if let Some(&v) = self.memo.get(&key) {
            return v;
        }
        let grammar = self.grammar;
        let v = grammar
            .productions
            .iter()
            .filter(|p| p.lhs == name)
            .any(|p| self.seq(&p.items, start, end));
        self.memo.insert(key, v);
        v
    }
}

/// Every `(claim, span, rule_id)` with a maximal non-empty span, found by
/// trying every claim production on every span.
pub fn brute_force(
    grammar: &RuleGrammar,
    lexicons: &Lexicons,
    tokens: &[String],
) -> Vec<(ClaimType, (usize, usize), usize)> {
    let mut m = Matcher { grammar, lexicons, tokens, memo: HashMap::new() };
    let mut found: BTreeMap<(ClaimType, (usize, usize)), usize> = BTreeMap::new();
    for p in &grammar.productions {
        let Some(&(claim, _)) = grammar.claims.get(&p.lhs) else { continue };
        for start in 0..tokens.len() {
            for end in start + 1..=tokens.len() {
                if m.seq(&p.items, start, end) {
                    let r = found.entry((claim, (start, end))).or_insert(p.id);
                    *r = (*r).min(p.id);
                }
            }
        }
    }
    let mut out: Vec<_> = found
        .iter()
        .filter(|(&(c, (s, e)), _)| {
            !found
                .keys()
                .any(|&(c2, (s2, e2))| c2 == c && (s2, e2) != (s, e) && s2 <= s && e <= e2)
        })
        .map(|(&(c, span), &r)| (c, span, r))
        .collect();
    out.sort_by_key(|&(c, span, r)| (span, c, r));
    out
}

fn phrase<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let n = rng.gen_range(1..=max_len);
    (0..n).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn items<R: Rng>(rng: &mut R, callable: &[usize]) -> String {
    let n = rng.gen_range(1..=4);
    let mut out = Vec::new();
    for _ in 0..n {
        let roll = rng.gen_range(0..10);
        let item = match roll {
            0..=3 => format!("\"{}\"", phrase(rng, 2)),
            4..=5 => format!("@L{}", rng.gen_range(0..2)),
            6..=7 => format!("GAP{{{}}}", rng.gen_range(0..=2)),
            _ if !callable.is_empty() => format!("N{}", callable.choose(rng).unwrap()),
            _ => format!("\"{}\"", phrase(rng, 1)),
        };
        out.push(item);
    }
    out.join(" ")
}

/// A random grammar of at most 10 productions over a five-word vocabulary.
/// Helper nonterminal `Ni` only references `Nj` with `j > i`, so the source
/// grammar is acyclic.
pub fn random_grammar<R: Rng>(rng: &mut R) -> (String, Lexicons) {
    let mut lines = Vec::new();
    let helpers = rng.gen_range(0..=3usize);
    for i in (0..helpers).rev() {
        let callable: Vec<usize> = (i + 1..helpers).collect();
        for _ in 0..rng.gen_range(1..=2) {
            lines.push(format!("N{i} -> {}", items(rng, &callable)));
        }
    }
    let all: Vec<usize> = (0..helpers).collect();
    let claims = rng.gen_range(1..=(10 - lines.len()).min(5));
    let mut claim_lines = Vec::new();
    for _ in 0..claims {
        let claim = CLAIMS.choose(rng).unwrap();
        claim_lines.push(format!("claim {claim} -> {}", items(rng, &all)));
    }
    // interleave so rule ids are not simply ordered by kind
    lines.extend(claim_lines);
    lines.shuffle(rng);
    let mut lexicons = Lexicons::new();
    for l in 0..2 {
        let name = format!("L{l}");
        let mut lex = Lexicon::new(name.clone());
        for _ in 0..rng.gen_range(1..=3) {
            lex.insert(&phrase(rng, 2)).unwrap();
        }
        lexicons.insert(name, lex);
    }
    (lines.join("\n"), lexicons)
}

/// Up to 12 tokens, mostly from the grammar vocabulary.
pub fn random_sentence<R: Rng>(rng: &mut R) -> Vec<String> {
    let n = rng.gen_range(0..=12);
    (0..n)
        .map(|_| if rng.gen_bool(0.1) { "z".to_string() } else { VOCAB.choose(rng).unwrap().to_string() })
        .collect()
}
