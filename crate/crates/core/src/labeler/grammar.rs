use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GrammarError;
use crate::corpus::tokenize;
use crate::taxonomy::ClaimType;

pub const DEFAULT_PRIORITY: i64 = 100;
pub const MAX_LEXICON_PHRASE_TOKENS: usize = 5;

/// Right-hand-side element of a source production.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Item {
    /// A quoted literal, already tokenized.
    Phrase(Vec<String>),
    Lexicon(String),
    /// Between 0 and `n` arbitrary tokens.
    Gap(usize),
    NonTerminal(String),
}

impl fmt::Display for Item {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Item::Phrase(tokens) => write!(f, "\"{}\"", tokens.join(" ")),
            Item::Lexicon(name) => write!(f, "@{name}"),
            Item::Gap(n) => write!(f, "GAP{{{n}}}"),
            Item::NonTerminal(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Production {
    /// Position in the grammar, used as the rule id of claim productions.
    pub id: usize,
    pub lhs: String,
    pub items: Vec<Item>,
}

/// Source rule grammar: productions plus the claim start symbols.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleGrammar {
    pub productions: Vec<Production>,
    /// Start symbol name -> (claim, priority). Lower priority wins ties.
    pub claims: BTreeMap<String, (ClaimType, i64)>,
}

impl RuleGrammar {
    /// Parses the line-oriented grammar format:
    ///
    /// ```text
    /// # comment
    /// claim BURDENSOME priority=2 -> "too" "burdensome"
    /// NOT_SUPPORT -> "not" GAP{2} "support"
    /// claim EXPLICIT_OPPOSITION -> NOT_SUPPORT
    /// ```
    pub fn parse(text: &str) -> Result<Self, GrammarError> {
        let mut grammar = RuleGrammar::default();
        let mut explicit_priority: BTreeMap<String, i64> = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let words = split_line(raw).map_err(|m| GrammarError::Parse { line: line_no, message: m })?;
            if words.is_empty() {
                continue;
            }
            let err = |message: String| GrammarError::Parse { line: line_no, message };
            let arrow = words
                .iter()
                .position(|w| w.text == "->" && !w.quoted)
                .ok_or_else(|| err("missing '->'".into()))?;
            let head = &words[..arrow];
            let (lhs, claim) = match head {
                [name] if !name.quoted => (name.text.clone(), None),
                [kw, name, rest @ ..] if kw.text == "claim" && !kw.quoted => {
                    let claim: ClaimType = name.text.parse().map_err(|_| err(format!("unknown claim type {}", name.text)))?;
                    if claim == ClaimType::Neutral {
                        return Err(err("Neutral cannot be a claim start symbol".into()));
                    }
                    let mut priority = None;
                    for opt in rest {
                        let value = opt
                            .text
                            .strip_prefix("priority=")
                            .ok_or_else(|| err(format!("unexpected {:?} before '->'", opt.text)))?;
                        priority = Some(value.parse::<i64>().map_err(|_| err(format!("bad priority {value:?}")))?);
                    }
                    (claim.symbol().to_string(), Some((claim, priority)))
                }
                _ => return Err(err("expected `NAME ->` or `claim TYPE [priority=N] ->`".into())),
            };
            if !is_identifier(&lhs) {
                return Err(err(format!("invalid symbol name {lhs:?}")));
            }
            if let Some((claim, priority)) = claim {
                if let Some(p) = priority {
                    match explicit_priority.get(&lhs) {
                        Some(&q) if q != p => {
                            return Err(err(format!("conflicting priorities {q} and {p} for {lhs}")));
                        }
                        _ => {
                            explicit_priority.insert(lhs.clone(), p);
                        }
                    }
                }
                let priority = explicit_priority.get(&lhs).copied().unwrap_or(DEFAULT_PRIORITY);
                grammar.claims.insert(lhs.clone(), (claim, priority));
            }
            let mut items = Vec::new();
            for w in &words[arrow + 1..] {
                items.push(parse_item(w).map_err(err)?);
            }
            let id = grammar.productions.len();
            grammar.productions.push(Production { id, lhs, items });
        }
        Ok(grammar)
    }

    pub fn load(path: &Path) -> Result<Self, GrammarError> {
        let text = std::fs::read_to_string(path).map_err(|e| GrammarError::Io(format!("{}: {e}", path.display())))?;
        RuleGrammar::parse(&text)
    }

    pub fn is_claim_symbol(&self, name: &str) -> bool {
        self.claims.contains_key(name)
    }

    /// Production ids of every claim production, with their claim.
    pub fn claim_productions(&self) -> impl Iterator<Item = (&Production, ClaimType)> {
        self.productions
            .iter()
            .filter_map(|p| self.claims.get(&p.lhs).map(|&(c, _)| (p, c)))
    }

    pub fn priorities(&self) -> BTreeMap<ClaimType, i64> {
        self.claims.values().map(|&(c, p)| (c, p)).collect()
    }

    /// Canonical text form, parseable by [`RuleGrammar::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut declared = BTreeSet::new();
        for p in &self.productions {
            match self.claims.get(&p.lhs) {
                Some(&(_, priority)) if declared.insert(p.lhs.clone()) => {
                    out.push_str(&format!("claim {} priority={priority} ->", p.lhs));
                }
                Some(_) => out.push_str(&format!("claim {} ->", p.lhs)),
                None => out.push_str(&format!("{} ->", p.lhs)),
            }
            for item in &p.items {
                out.push(' ');
                out.push_str(&item.to_string());
            }
            out.push('\n');
        }
        out
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.chars().all(|c| c.is_alphanumeric() || c == '_')
        && !s.starts_with(|c: char| c.is_ascii_digit())
}

struct Word {
    text: String,
    quoted: bool,
}

/// Splits on whitespace, honouring double-quoted literals and `#` comments.
fn split_line(line: &str) -> Result<Vec<Word>, String> {
    let mut words = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '#' {
            break;
        } else if c == '"' {
            chars.next();
            let mut text = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some(e) => text.push(e),
                        None => return Err("unterminated escape".into()),
                    },
                    Some(ch) => text.push(ch),
                    None => return Err("unterminated string literal".into()),
                }
            }
            words.push(Word { text, quoted: true });
        } else {
            let mut text = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() || ch == '#' || ch == '"' {
                    break;
                }
                text.push(ch);
                chars.next();
            }
            words.push(Word { text, quoted: false });
        }
    }
    Ok(words)
}

fn parse_item(w: &Word) -> Result<Item, String> {
    if w.quoted {
        let tokens = tokenize(&w.text);
        if tokens.is_empty() {
            return Err(format!("literal {:?} has no tokens", w.text));
        }
        return Ok(Item::Phrase(tokens));
    }
    if let Some(name) = w.text.strip_prefix('@') {
        if !is_identifier(name) {
            return Err(format!("invalid lexicon name {name:?}"));
        }
        return Ok(Item::Lexicon(name.to_string()));
    }
    if let Some(rest) = w.text.strip_prefix("GAP{") {
        let n = rest
            .strip_suffix('}')
            .and_then(|n| n.parse::<usize>().ok())
            .ok_or_else(|| format!("invalid gap {:?}", w.text))?;
        return Ok(Item::Gap(n));
    }
    if is_identifier(&w.text) {
        return Ok(Item::NonTerminal(w.text.clone()));
    }
    Err(format!("unrecognized item {:?}", w.text))
}

/// A named set of cue phrases usable as a grammar terminal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    /// Tokenized phrases joined by single spaces.
    pub entries: BTreeSet<String>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>) -> Self {
        Lexicon {
            name: name.into(),
            entries: BTreeSet::new(),
        }
    }

    /// Normalizes a phrase to its tokenized form, rejecting empty and
    /// over-long phrases.
    pub fn normalize_phrase(phrase: &str) -> Result<String, GrammarError> {
        let tokens = tokenize(phrase);
        if tokens.is_empty() || tokens.len() > MAX_LEXICON_PHRASE_TOKENS {
            return Err(GrammarError::InvalidPhrase(phrase.to_string()));
        }
        Ok(tokens.join(" "))
    }

    /// Adds a phrase; returns `false` if it was already present.
    pub fn insert(&mut self, phrase: &str) -> Result<bool, GrammarError> {
        let normalized = Lexicon::normalize_phrase(phrase)?;
        Ok(self.entries.insert(normalized))
    }

    pub fn remove(&mut self, phrase: &str) -> Result<bool, GrammarError> {
        let normalized = Lexicon::normalize_phrase(phrase)?;
        Ok(self.entries.remove(&normalized))
    }

    /// One phrase per line; `#` starts a comment.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, GrammarError> {
        let mut lex = Lexicon::new(name);
        for line in text.lines() {
            let phrase = line.split('#').next().unwrap_or("").trim();
            if !phrase.is_empty() {
                lex.insert(phrase)?;
            }
        }
        Ok(lex)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{e}\n")).collect()
    }
}

/// Lexicons keyed by name.
pub type Lexicons = BTreeMap<String, Lexicon>;

/// A grammar together with the lexicons it references.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrammarPack {
    pub grammar: RuleGrammar,
    pub lexicons: Lexicons,
}

impl GrammarPack {
    /// Loads `grammar.cfg` and `lexicons/*.txt` from a directory. Lexicon
    /// names are the uppercased file stems.
    pub fn load_dir(dir: &Path) -> Result<Self, GrammarError> {
        let grammar = RuleGrammar::load(&dir.join("grammar.cfg"))?;
        let mut lexicons = Lexicons::new();
        let lex_dir = dir.join("lexicons");
        if lex_dir.is_dir() {
            let io = |e: std::io::Error| GrammarError::Io(format!("{}: {e}", lex_dir.display()));
            let mut paths: Vec<_> = std::fs::read_dir(&lex_dir)
                .map_err(io)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "txt"))
                .collect();
            paths.sort();
            for path in paths {
                let name = path.file_stem().unwrap_or_default().to_string_lossy().to_uppercase();
                let text = std::fs::read_to_string(&path).map_err(io)?;
                lexicons.insert(name.clone(), Lexicon::parse(name, &text)?);
            }
        }
        Ok(GrammarPack { grammar, lexicons })
    }

    pub fn save_dir(&self, dir: &Path) -> Result<(), GrammarError> {
        let io = |e: std::io::Error| GrammarError::Io(format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir.join("lexicons")).map_err(io)?;
        std::fs::write(dir.join("grammar.cfg"), self.grammar.to_text()).map_err(io)?;
        for lex in self.lexicons.values() {
            let path = dir.join("lexicons").join(format!("{}.txt", lex.name.to_lowercase()));
            std::fs::write(path, lex.to_text()).map_err(io)?;
        }
        Ok(())
    }

    /// The bundled starter grammar and cue lexicons.
    pub fn seed() -> Self {
        let grammar = RuleGrammar::parse(SEED_GRAMMAR).expect("seed grammar parses");
        let lexicons = SEED_LEXICONS
            .iter()
            .map(|(name, text)| (name.to_string(), Lexicon::parse(*name, text).expect("seed lexicon parses")))
            .collect();
        GrammarPack { grammar, lexicons }
    }
}

const SEED_GRAMMAR: &str = include_str!("../../assets/seed/grammar.cfg");
const SEED_LEXICONS: &[(&str, &str)] = &[
    ("NEGATION", include_str!("../../assets/seed/lexicons/negation.txt")),
    ("POLARITY_NEG", include_str!("../../assets/seed/lexicons/polarity_neg.txt")),
    ("POLARITY_POS", include_str!("../../assets/seed/lexicons/polarity_pos.txt")),
    ("POLICY_MENTION", include_str!("../../assets/seed/lexicons/policy_mention.txt")),
    ("SUPPORT_VERB", include_str!("../../assets/seed/lexicons/support_verb.txt")),
    ("LITIGATION", include_str!("../../assets/seed/lexicons/litigation.txt")),
    ("TIME_PRESSURE", include_str!("../../assets/seed/lexicons/time_pressure.txt")),
    ("EXCESS", include_str!("../../assets/seed/lexicons/excess.txt")),
];
