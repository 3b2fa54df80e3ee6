use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::grammar::{Item, Lexicons, RuleGrammar};
use super::GrammarError;
use crate::taxonomy::ClaimType;

pub type SymbolId = u32;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SymbolKind {
    /// A source nonterminal.
    Named(String),
    /// The alternatives of one claim production.
    Rule(usize),
    /// Phrase alternatives of a lexicon.
    Lexicon(String),
    /// Preterminal for one token literal.
    Token(String),
    /// Preterminal matching any token.
    Any,
    /// Binarization helper.
    Fresh(usize),
}

/// Grammar in Chomsky Normal Form extended with unit productions.
///
/// Productions are `A -> B C`, `A -> token`, `A -> ANY` and `A -> B`;
/// unit productions are resolved through a precomputed closure during
/// parsing. Gaps and nullable nonterminals are compiled away, so no symbol
/// derives the empty string.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompiledGrammar {
    pub(crate) symbols: Vec<SymbolKind>,
    /// Binary productions `(lhs, left, right)`.
    pub(crate) binary: Vec<(SymbolId, SymbolId, SymbolId)>,
    /// `left -> [(right, lhs)]`.
    pub(crate) by_left: Vec<Vec<(SymbolId, SymbolId)>>,
    /// Symbols deriving a given token directly.
    pub(crate) lexical: HashMap<String, Vec<SymbolId>>,
    /// Symbols deriving any single token.
    pub(crate) any_token: Vec<SymbolId>,
    /// For each symbol, every symbol that reaches it through unit productions.
    pub(crate) unit_closure: Vec<Vec<SymbolId>>,
    /// Claim rule symbols: `(symbol, rule id, claim)`.
    pub(crate) rules: Vec<(SymbolId, usize, ClaimType)>,
    pub(crate) rule_of_symbol: HashMap<SymbolId, (usize, ClaimType)>,
    pub priorities: BTreeMap<ClaimType, i64>,
}

/// Flattened right-hand side element after gap and nullable expansion.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Elem {
    Token(String),
    Any,
    Named(String),
    Lexicon(String),
}

struct Builder {
    symbols: Vec<SymbolKind>,
    index: HashMap<SymbolKind, SymbolId>,
    binary: BTreeSet<(SymbolId, SymbolId, SymbolId)>,
    units: BTreeSet<(SymbolId, SymbolId)>,
    lexical: BTreeMap<String, BTreeSet<SymbolId>>,
    any_token: BTreeSet<SymbolId>,
    chains: HashMap<Vec<SymbolId>, SymbolId>,
    fresh_count: usize,
}

impl Builder {
    fn new() -> Self {
        Builder {
            symbols: Vec::new(),
            index: HashMap::new(),
            binary: BTreeSet::new(),
            units: BTreeSet::new(),
            lexical: BTreeMap::new(),
            any_token: BTreeSet::new(),
            chains: HashMap::new(),
            fresh_count: 0,
        }
    }

    fn sym(&mut self, kind: SymbolKind) -> SymbolId {
        if let Some(&id) = self.index.get(&kind) {
            return id;
        }
        let id = self.symbols.len() as SymbolId;
        self.symbols.push(kind.clone());
        self.index.insert(kind, id);
        id
    }

    fn fresh(&mut self) -> SymbolId {
        self.fresh_count += 1;
        self.sym(SymbolKind::Fresh(self.fresh_count - 1))
    }

    fn elem_symbol(&mut self, elem: &Elem) -> SymbolId {
        match elem {
            Elem::Token(t) => {
                let id = self.sym(SymbolKind::Token(t.clone()));
                self.lexical.entry(t.clone()).or_default().insert(id);
                id
            }
            Elem::Any => {
                let id = self.sym(SymbolKind::Any);
                self.any_token.insert(id);
                id
            }
            Elem::Named(n) => self.sym(SymbolKind::Named(n.clone())),
            Elem::Lexicon(n) => self.sym(SymbolKind::Lexicon(n.clone())),
        }
    }

    /// Adds `lhs -> elems` in CNF form.
    fn add(&mut self, lhs: SymbolId, elems: &[Elem]) {
        match elems {
            [] => unreachable!("empty variants are filtered before binarization"),
            [Elem::Token(t)] => {
                self.lexical.entry(t.clone()).or_default().insert(lhs);
            }
            [Elem::Any] => {
                self.any_token.insert(lhs);
            }
            [single] => {
                let child = self.elem_symbol(single);
                if child != lhs {
                    self.units.insert((lhs, child));
                }
            }
            _ => {
                let ids: Vec<SymbolId> = elems.iter().map(|e| self.elem_symbol(e)).collect();
                let right = self.chain(&ids[1..]);
                self.binary.insert((lhs, ids[0], right));
            }
        }
    }

    /// Symbol deriving exactly the sequence `ids` (length >= 1); sequences of
    /// two or more get a shared fresh symbol.
    fn chain(&mut self, ids: &[SymbolId]) -> SymbolId {
        if ids.len() == 1 {
            return ids[0];
        }
        if let Some(&s) = self.chains.get(ids) {
            return s;
        }
        let right = self.chain(&ids[1..]);
        let s = self.fresh();
        self.binary.insert((s, ids[0], right));
        self.chains.insert(ids.to_vec(), s);
        s
    }
}

fn nullable_set(grammar: &RuleGrammar) -> HashSet<String> {
    let mut nullable = HashSet::new();
    loop {
        let mut changed = false;
        for p in &grammar.productions {
            if nullable.contains(&p.lhs) {
                continue;
            }
            let all = p.items.iter().all(|item| match item {
                Item::Gap(_) => true,
                Item::NonTerminal(n) => nullable.contains(n),
                _ => false,
            });
            if all {
                nullable.insert(p.lhs.clone());
                changed = true;
            }
        }
        if !changed {
            return nullable;
        }
    }
}

/// All non-empty expansions of a right-hand side.
fn variants(items: &[Item], nullable: &HashSet<String>) -> Vec<Vec<Elem>> {
    let mut acc: Vec<Vec<Elem>> = vec![Vec::new()];
    for item in items {
        let choices: Vec<Vec<Elem>> = match item {
            Item::Phrase(tokens) => vec![tokens.iter().cloned().map(Elem::Token).collect()],
            Item::Lexicon(name) => vec![vec![Elem::Lexicon(name.clone())]],
            Item::Gap(n) => (0..=*n).map(|k| vec![Elem::Any; k]).collect(),
            Item::NonTerminal(name) => {
                let mut c = vec![vec![Elem::Named(name.clone())]];
                if nullable.contains(name) {
                    c.push(Vec::new());
                }
                c
            }
        };
        let mut next = Vec::with_capacity(acc.len() * choices.len());
        for prefix in &acc {
            for choice in &choices {
                let mut v = prefix.clone();
                v.extend(choice.iter().cloned());
                next.push(v);
            }
        }
        acc = next;
    }
    let mut seen = HashSet::new();
    acc.into_iter().filter(|v| !v.is_empty() && seen.insert(v.clone())).collect()
}

impl CompiledGrammar {
    pub fn compile(grammar: &RuleGrammar, lexicons: &Lexicons) -> Result<Self, GrammarError> {
        let defined: HashSet<&str> = grammar.productions.iter().map(|p| p.lhs.as_str()).collect();
        for p in &grammar.productions {
            if p.items.is_empty() {
                return Err(GrammarError::EmptyProduction { rule: p.id, lhs: p.lhs.clone() });
            }
            for item in &p.items {
                match item {
                    Item::Lexicon(name) => match lexicons.get(name) {
                        None => return Err(GrammarError::UnknownLexicon(name.clone())),
                        Some(lex) if lex.entries.is_empty() => return Err(GrammarError::EmptyLexicon(name.clone())),
                        Some(_) => {}
                    },
                    Item::NonTerminal(name) if !defined.contains(name.as_str()) => {
                        return Err(GrammarError::UndefinedSymbol(name.clone()));
                    }
                    _ => {}
                }
            }
        }

        let nullable = nullable_set(grammar);
        let mut b = Builder::new();
        let mut rules = Vec::new();
        let mut used_lexicons = BTreeSet::new();

        for p in &grammar.productions {
            let named = b.sym(SymbolKind::Named(p.lhs.clone()));
            let lhs = match grammar.claims.get(&p.lhs) {
                Some(&(claim, _)) => {
                    let rule = b.sym(SymbolKind::Rule(p.id));
                    b.units.insert((named, rule));
                    rules.push((rule, p.id, claim));
                    rule
                }
                None => named,
            };
            for v in variants(&p.items, &nullable) {
                for e in &v {
                    if let Elem::Lexicon(n) = e {
                        used_lexicons.insert(n.clone());
                    }
                }
                b.add(lhs, &v);
            }
        }
        for name in used_lexicons {
            let lhs = b.sym(SymbolKind::Lexicon(name.clone()));
            for entry in &lexicons[&name].entries {
                let elems: Vec<Elem> = entry.split(' ').map(|t| Elem::Token(t.to_string())).collect();
                b.add(lhs, &elems);
            }
        }

        let n = b.symbols.len();
        let mut by_left = vec![Vec::new(); n];
        for &(a, l, r) in &b.binary {
            by_left[l as usize].push((r, a));
        }
        // parents[c] = symbols with a unit production to c
        let mut parents: Vec<Vec<SymbolId>> = vec![Vec::new(); n];
        for &(a, c) in &b.units {
            parents[c as usize].push(a);
        }
        let unit_closure = (0..n)
            .map(|start| {
                let mut seen = vec![false; n];
                seen[start] = true;
                let mut stack = vec![start as SymbolId];
                let mut out = Vec::new();
                while let Some(s) = stack.pop() {
                    for &p in &parents[s as usize] {
                        if !seen[p as usize] {
                            seen[p as usize] = true;
                            out.push(p);
                            stack.push(p);
                        }
                    }
                }
                out.sort_unstable();
                out
            })
            .collect();
        let rule_of_symbol = rules.iter().map(|&(s, id, c)| (s, (id, c))).collect();

        Ok(CompiledGrammar {
            symbols: b.symbols,
            binary: b.binary.into_iter().collect(),
            by_left,
            lexical: b.lexical.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect(),
            any_token: b.any_token.into_iter().collect(),
            unit_closure,
            rules,
            rule_of_symbol,
            priorities: grammar.priorities(),
        })
    }

    pub fn symbol_count(&self) -> usize {
        self.symbols.len()
    }

    pub fn binary_rule_count(&self) -> usize {
        self.binary.len()
    }

    pub fn fresh_symbol_count(&self) -> usize {
        self.symbols.iter().filter(|k| matches!(k, SymbolKind::Fresh(_))).count()
    }

    pub fn symbol(&self, kind: &SymbolKind) -> Option<SymbolId> {
        self.symbols.iter().position(|k| k == kind).map(|i| i as SymbolId)
    }

    pub fn priority(&self, claim: ClaimType) -> i64 {
        self.priorities.get(&claim).copied().unwrap_or(super::grammar::DEFAULT_PRIORITY)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::grammar::Lexicon;

    fn compile(text: &str) -> Result<CompiledGrammar, GrammarError> {
        let mut lexicons = Lexicons::new();
        lexicons.insert("NEG".into(), Lexicon::parse("NEG", "not\nnever\n").unwrap());
        CompiledGrammar::compile(&RuleGrammar::parse(text).unwrap(), &lexicons)
    }

    #[test]
    fn chain_binarization() {
        let g = compile("A -> \"w\" \"x\" \"y\" \"z\"").unwrap();
        assert_eq!(g.binary_rule_count(), 3);
        assert_eq!(g.fresh_symbol_count(), 2);
    }

    #[test]
    fn missing_lexicon_is_named() {
        let err = compile("claim OVERREACH -> @FOO \"x\"").unwrap_err();
        assert_eq!(err, GrammarError::UnknownLexicon("FOO".into()));
        assert!(err.to_string().contains("FOO"));
    }

    #[test]
    fn empty_production_and_undefined_symbol() {
        assert!(matches!(compile("A ->"), Err(GrammarError::EmptyProduction { .. })));
        assert_eq!(compile("A -> B").unwrap_err(), GrammarError::UndefinedSymbol("B".into()));
    }

    #[test]
    fn compile_is_deterministic() {
        let text = "N -> @NEG GAP{2}\nclaim OVERREACH -> N \"too\" \"far\"\nclaim TOO_BROAD -> \"overly broad\"";
        let a = compile(text).unwrap();
        let b = compile(text).unwrap();
        assert_eq!(a.symbols, b.symbols);
        assert_eq!(a.binary, b.binary);
        assert_eq!(a.unit_closure, b.unit_closure);
    }

    #[test]
    fn gap_expansion() {
        let v = variants(&[Item::Phrase(vec!["x".into()]), Item::Gap(2)], &HashSet::new());
        assert_eq!(
            v,
            vec![
                vec![Elem::Token("x".into())],
                vec![Elem::Token("x".into()), Elem::Any],
                vec![Elem::Token("x".into()), Elem::Any, Elem::Any],
            ]
        );
        assert!(variants(&[Item::Gap(0)], &HashSet::new()).is_empty());
    }
}
