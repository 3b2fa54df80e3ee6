use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::compile::{CompiledGrammar, SymbolId};
use crate::taxonomy::ClaimType;

/// A claim derived over a token span by one claim production.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WeakLabel {
    pub sentence_id: u64,
    pub claim: ClaimType,
    /// Half-open token range `[start, end)`.
    pub span: (usize, usize),
    pub rule_id: usize,
}

impl WeakLabel {
    pub fn span_len(&self) -> usize {
        self.span.1 - self.span.0
    }
}

struct Cell {
    members: Vec<u64>,
    list: Vec<SymbolId>,
}

impl Cell {
    fn new(words: usize) -> Self {
        Cell {
            members: vec![0; words],
            list: Vec::new(),
        }
    }

    fn contains(&self, s: SymbolId) -> bool {
        self.members[(s / 64) as usize] & (1 << (s % 64)) != 0
    }

    fn insert(&mut self, s: SymbolId) -> bool {
        let word = &mut self.members[(s / 64) as usize];
        let bit = 1u64 << (s % 64);
        if *word & bit != 0 {
            return false;
        }
        *word |= bit;
        self.list.push(s);
        true
    }
}

impl CompiledGrammar {
    fn close(&self, cell: &mut Cell, from: usize) {
        let mut i = from;
        while i < cell.list.len() {
            let s = cell.list[i];
            for &p in &self.unit_closure[s as usize] {
                cell.insert(p);
            }
            i += 1;
        }
    }

    fn fill(&self, tokens: &[String]) -> Vec<Vec<Cell>> {
        let n = tokens.len();
        let words = self.symbols.len().div_ceil(64).max(1);
        // chart[len - 1][start]
        let mut chart: Vec<Vec<Cell>> = Vec::with_capacity(n);
        let mut first = Vec::with_capacity(n);
        for tok in tokens {
            let mut cell = Cell::new(words);
            if let Some(syms) = self.lexical.get(tok) {
                for &s in syms {
                    cell.insert(s);
                }
            }
            for &s in &self.any_token {
                cell.insert(s);
            }
            self.close(&mut cell, 0);
            first.push(cell);
        }
        chart.push(first);
        for len in 2..=n {
            let mut row = Vec::with_capacity(n + 1 - len);
            for start in 0..=(n - len) {
                let mut cell = Cell::new(words);
                for left_len in 1..len {
                    let left = &chart[left_len - 1][start];
                    let right = &chart[len - left_len - 1][start + left_len];
                    if left.list.is_empty() || right.list.is_empty() {
                        continue;
                    }
                    for &b in &left.list {
                        for &(c, a) in &self.by_left[b as usize] {
                            if right.contains(c) {
                                cell.insert(a);
                            }
                        }
                    }
                }
                self.close(&mut cell, 0);
                row.push(cell);
            }
            chart.push(row);
        }
        chart
    }

    /// Every (claim, maximal span) derivable from a claim start symbol over a
    /// contiguous token span, tagged with the lowest rule id deriving that
    /// span. A span is maximal when no other derived span of the same claim
    /// strictly contains it. Output is sorted by span, then claim.
    pub fn cky_match(&self, sentence_id: u64, tokens: &[String]) -> Vec<WeakLabel> {
        if tokens.is_empty() || self.rules.is_empty() {
            return Vec::new();
        }
        let chart = self.fill(tokens);
        // (claim, span) -> lowest rule id
        let mut found: BTreeMap<(ClaimType, (usize, usize)), usize> = BTreeMap::new();
        for (len_idx, row) in chart.iter().enumerate() {
            for (start, cell) in row.iter().enumerate() {
                for &s in &cell.list {
                    if let Some(&(rule, claim)) = self.rule_of_symbol.get(&s) {
                        let span = (start, start + len_idx + 1);
                        found
                            .entry((claim, span))
                            .and_modify(|r| *r = (*r).min(rule))
                            .or_insert(rule);
                    }
                }
            }
        }
        maximal(sentence_id, found)
    }
}

pub(crate) fn maximal(
    sentence_id: u64,
    found: BTreeMap<(ClaimType, (usize, usize)), usize>,
) -> Vec<WeakLabel> {
    type Spans = Vec<((usize, usize), usize)>;
    let mut by_claim: BTreeMap<ClaimType, Spans> = BTreeMap::new();
    for ((claim, span), rule) in found {
        by_claim.entry(claim).or_default().push((span, rule));
    }
    let mut out = Vec::new();
    for (claim, spans) in by_claim {
        for &(span, rule) in &spans {
            let contained = spans
                .iter()
                .any(|&(o, _)| o != span && o.0 <= span.0 && span.1 <= o.1);
            if !contained {
                out.push(WeakLabel {
                    sentence_id,
                    claim,
                    span,
                    rule_id: rule,
                });
            }
        }
    }
    out.sort_by_key(|l| (l.span, l.claim, l.rule_id));
    out
}
