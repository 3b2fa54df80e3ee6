use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fit_principal_component, io_err, FeatureError};

pub const DEFAULT_SIF_A: f64 = 1e-3;

/// Word vectors with the statistics needed for SIF sentence embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    /// Tokens in file order; the position doubles as a frequency rank.
    tokens: Vec<String>,
    vectors: Vec<Vec<f64>>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    /// Training-corpus token counts.
    counts: BTreeMap<String, u64>,
    total_count: u64,
    pub a: f64,
    /// First principal component of the training sentence averages.
    pub u: Option<Vec<f64>>,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` pairs, most frequent first.
    /// Later duplicates of a token are ignored.
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self, FeatureError> {
        let dim = entries.first().map(|(_, v)| v.len()).ok_or(FeatureError::EmptyTable)?;
        let mut table = EmbeddingTable {
            dim,
            tokens: Vec::new(),
            vectors: Vec::new(),
            index: HashMap::new(),
            counts: BTreeMap::new(),
            total_count: 0,
            a: DEFAULT_SIF_A,
            u: None,
        };
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(FeatureError::Parse {
                    path: String::new(),
                    line: table.tokens.len() + 1,
                    message: format!("vector for {token:?} has width {}, expected {dim}", vector.len()),
                });
            }
            if table.index.contains_key(&token) {
                continue;
            }
            table.index.insert(token.clone(), table.tokens.len());
            table.tokens.push(token);
            table.vectors.push(vector);
        }
        Ok(table)
    }

    /// Parses the text vector format `token v1 ... vd`. A leading
    /// `count dim` header line is accepted and skipped.
    pub fn parse(text: &str, source: &str) -> Result<Self, FeatureError> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if n == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values: Result<Vec<f64>, _> = fields[1..].iter().map(|f| f.parse::<f64>()).collect();
            let values = values.map_err(|e| FeatureError::Parse {
                path: source.to_string(),
                line: n + 1,
                message: e.to_string(),
            })?;
            if values.is_empty() || values.iter().any(|x| !x.is_finite()) {
                return Err(FeatureError::Parse {
                    path: source.to_string(),
                    line: n + 1,
                    message: "expected finite vector components".into(),
                });
            }
            entries.push((fields[0].to_lowercase(), values));
        }
        EmbeddingTable::new(entries).map_err(|e| match e {
            FeatureError::Parse { line, message, .. } => FeatureError::Parse { path: source.to_string(), line, message },
            other => other,
        })
    }

    pub fn load(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        EmbeddingTable::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.tokens.len(), self.dim);
        for (t, v) in self.tokens.iter().zip(&self.vectors) {
            out.push_str(t);
            for x in v {
                out.push(' ');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&i| self.vectors[i].as_slice())
    }

    /// Restores the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    /// Estimated unigram probability. Training counts are used when the word
    /// was seen in training; otherwise a Zipf estimate from the word's rank
    /// in the vector file, `1 / ((rank + 1) · H_V)`.
    pub fn probability(&self, token: &str) -> f64 {
        if let Some(&c) = self.counts.get(token) {
            return c as f64 / self.total_count as f64;
        }
        let rank = self.index.get(token).copied().unwrap_or(self.tokens.len());
        let harmonic: f64 = (1..=self.tokens.len().max(1)).map(|k| 1.0 / k as f64).sum();
        1.0 / ((rank + 1) as f64 * harmonic)
    }

    pub fn sif_weight(&self, token: &str) -> f64 {
        self.a / (self.a + self.probability(token))
    }

    /// SIF-weighted mean of the in-table token vectors, before component
    /// removal. Zero when no token is in the table.
    pub fn weighted_average(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let mut n = 0usize;
        for t in tokens {
            if let Some(vec) = self.vector(t) {
                let w = self.sif_weight(t);
                for (acc, x) in v.iter_mut().zip(vec) {
                    *acc += w * x;
                }
                n += 1;
            }
        }
        if n > 0 {
            v.iter_mut().for_each(|x| *x /= n as f64);
        }
        v
    }

    /// Replaces the word counts with those of the training sentences and
    /// fits the principal component on their weighted averages. The
    /// component stays unset when fewer than two training sentences have an
    /// in-table token.
    pub fn fit(&mut self, train: &[Vec<String>]) {
        self.counts.clear();
        self.total_count = 0;
        for tokens in train {
            for t in tokens {
                *self.counts.entry(t.clone()).or_default() += 1;
                self.total_count += 1;
            }
        }
        self.u = None;
        let averages: Vec<Vec<f64>> = train.iter().map(|t| self.weighted_average(t)).collect();
        self.u = fit_principal_component(&averages);
    }

    /// `v − u(uᵀv)` for the weighted average `v`, or `v` itself when no
    /// component is set.
    pub fn sif_embed(&self, tokens: &[String]) -> Vec<f64> {
        let mut v = self.weighted_average(tokens);
        if let Some(u) = &self.u {
            remove_component(&mut v, u);
        }
        v
    }
}

pub(crate) fn remove_component(v: &mut [f64], u: &[f64]) {
    let proj: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    for (x, ui) in v.iter_mut().zip(u) {
        *x -= proj * ui;
    }
}
