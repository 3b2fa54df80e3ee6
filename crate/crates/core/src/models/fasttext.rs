use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, example_weights, index_labels, log_softmax, softmax, ModelError, TrainConfig};
use crate::features::{hashed_buckets, BucketMatrix, DEFAULT_BUCKETS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastTextConfig {
    pub dim: usize,
    pub buckets: u64,
    pub train: TrainConfig,
}

impl Default for FastTextConfig {
    fn default() -> Self {
        FastTextConfig {
            dim: 50,
            buckets: DEFAULT_BUCKETS,
            train: TrainConfig {
                learning_rate: 0.5,
                epochs: 10,
                ..TrainConfig::default()
            },
        }
    }
}

/// Averaged hashed n-gram embeddings followed by a softmax layer, trained
/// jointly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FastTextModel {
    pub classes: Vec<String>,
    pub embeddings: BucketMatrix,
    /// `classes × dim`, row-major.
    pub output: Vec<f64>,
    pub bias: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FastTextGrad {
    pub output: Vec<f64>,
    pub bias: Vec<f64>,
    /// Gradient of each bucket row that the examples touch.
    pub rows: BTreeMap<u64, Vec<f64>>,
}

struct Forward {
    ids: Vec<u64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

impl FastTextModel {
    pub fn new(classes: Vec<String>, dim: usize, buckets: u64, seed: u64) -> Self {
        let c = classes.len();
        FastTextModel {
            classes,
            embeddings: BucketMatrix::new(dim, buckets, seed, 1.0 / dim as f64),
            output: vec![0.0; c * dim],
            bias: vec![0.0; c],
            lambda: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.embeddings.dim
    }

    fn forward(&self, tokens: &[String]) -> Forward {
        self.forward_ids(hashed_buckets(tokens, self.embeddings.buckets))
    }

    fn forward_ids(&self, ids: Vec<u64>) -> Forward {
        let d = self.dim();
        let mut hidden = vec![0.0; d];
        for &b in &ids {
            for (h, x) in hidden.iter_mut().zip(self.embeddings.row(b).iter()) {
                *h += x;
            }
        }
        if !ids.is_empty() {
            hidden.iter_mut().for_each(|h| *h /= ids.len() as f64);
        }
        let logits = (0..self.classes.len())
            .map(|c| self.bias[c] + self.output[c * d..(c + 1) * d].iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>())
            .collect();
        Forward { ids, hidden, logits }
    }

    pub fn predict_proba(&self, tokens: &[String]) -> Vec<f64> {
        softmax(&self.forward(tokens).logits)
    }

    pub fn predict(&self, tokens: &[String]) -> &str {
        &self.classes[argmax(&self.predict_proba(tokens))]
    }

    /// Weighted mean cross-entropy plus `(λ/2)‖W_out‖²`, and its gradient.
    /// Bucket vectors are not regularized.
    pub fn loss_and_grad(&self, x: &[Vec<String>], y: &[usize], example_weights: &[f64], lambda: f64) -> (f64, FastTextGrad) {
        let ids: Vec<Vec<u64>> = x.iter().map(|t| hashed_buckets(t, self.embeddings.buckets)).collect();
        let refs: Vec<&[u64]> = ids.iter().map(Vec::as_slice).collect();
        self.loss_and_grad_ids(&refs, y, example_weights, lambda)
    }

    fn loss_and_grad_ids(&self, x: &[&[u64]], y: &[usize], example_weights: &[f64], lambda: f64) -> (f64, FastTextGrad) {
        let d = self.dim();
        let n = x.len() as f64;
        let mut loss = 0.5 * lambda * self.output.iter().map(|w| w * w).sum::<f64>();
        let mut go: Vec<f64> = self.output.iter().map(|w| lambda * w).collect();
        let mut gb = vec![0.0; self.classes.len()];
        let mut rows: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for ((ids, &yi), &wi) in x.iter().zip(y).zip(example_weights) {
            let f = self.forward_ids(ids.to_vec());
            let p = softmax(&f.logits);
            loss -= wi * log_softmax(&f.logits, yi) / n;
            let mut dh = vec![0.0; d];
            for (c, pc) in p.iter().enumerate() {
                let r = wi * (pc - if c == yi { 1.0 } else { 0.0 }) / n;
                gb[c] += r;
                for k in 0..d {
                    go[c * d + k] += r * f.hidden[k];
                    dh[k] += r * self.output[c * d + k];
                }
            }
            if !f.ids.is_empty() {
                let share = 1.0 / f.ids.len() as f64;
                for &b in &f.ids {
                    let g = rows.entry(b).or_insert_with(|| vec![0.0; d]);
                    for (gk, dk) in g.iter_mut().zip(&dh) {
                        *gk += dk * share;
                    }
                }
            }
        }
        (loss, FastTextGrad { output: go, bias: gb, rows })
    }

    pub fn train<S: AsRef<str>>(
        x: &[Vec<String>],
        y: &[S],
        classes: &[String],
        cfg: &FastTextConfig,
    ) -> Result<Self, ModelError> {
        let t = &cfg.train;
        t.validate()?;
        if cfg.dim == 0 || cfg.buckets == 0 {
            return Err(ModelError::Config("dim and buckets must be positive".into()));
        }
        if x.len() != y.len() {
            return Err(ModelError::LengthMismatch { features: x.len(), labels: y.len() });
        }
        let yi = index_labels(y, classes)?;
        let weights = example_weights(&t.class_weights, &yi, classes);
        let mut model = FastTextModel::new(classes.to_vec(), cfg.dim, cfg.buckets, t.seed);
        let ids: Vec<Vec<u64>> = x.iter().map(|t| hashed_buckets(t, cfg.buckets)).collect();
        model.lambda = t.lambda;
        let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
        let mut order: Vec<usize> = (0..x.len()).collect();
        for epoch in 0..t.epochs {
            let lr = t.learning_rate_at(epoch);
            order.shuffle(&mut rng);
            for batch in order.chunks(t.batch_size) {
                let bx: Vec<&[u64]> = batch.iter().map(|&i| ids[i].as_slice()).collect();
                let by: Vec<usize> = batch.iter().map(|&i| yi[i]).collect();
                let bw: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
                let (_, g) = model.loss_and_grad_ids(&bx, &by, &bw, t.lambda);
                for (w, gw) in model.output.iter_mut().zip(&g.output) {
                    *w -= lr * gw;
                }
                for (b, gb) in model.bias.iter_mut().zip(&g.bias) {
                    *b -= lr * gb;
                }
                for (bucket, grow) in g.rows {
                    for (v, gv) in model.embeddings.row_mut(bucket).iter_mut().zip(&grow) {
                        *v -= lr * gv;
                    }
                }
            }
        }
        if model.output.iter().chain(&model.bias).any(|w| !w.is_finite()) {
            return Err(ModelError::Config("training diverged; lower the learning rate".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn empty_sentence_uses_bias_only() {
        let mut m = FastTextModel::new(vec!["a".into(), "b".into()], 4, 100, 1);
        assert_eq!(m.predict_proba(&[]), vec![0.5, 0.5]);
        m.bias = vec![0.0, 1.0];
        assert_eq!(m.predict_proba(&[]), softmax(&[0.0, 1.0]));
    }

    #[test]
    fn disjoint_vocabularies_separate() {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..100 {
            x.push(words(&format!("alpha{} beta{} gamma", i % 7, i % 5)));
            y.push("left");
            x.push(words(&format!("delta{} eps{} zeta", i % 6, i % 4)));
            y.push("right");
        }
        let cfg = FastTextConfig { dim: 8, buckets: 10_000, ..Default::default() };
        let m = FastTextModel::train(&x, &y, &["left".to_string(), "right".to_string()], &cfg).unwrap();
        let correct = x.iter().zip(&y).filter(|(xi, yi)| m.predict(xi) == **yi).count();
        assert!(correct as f64 / x.len() as f64 >= 0.99);
    }

    #[test]
    fn deterministic_given_seed() {
        let x = vec![words("a b"), words("c d"), words("a c")];
        let y = ["p", "q", "p"];
        let cl = vec!["p".to_string(), "q".to_string()];
        let cfg = FastTextConfig { dim: 3, buckets: 50, ..Default::default() };
        assert_eq!(FastTextModel::train(&x, &y, &cl, &cfg).unwrap(), FastTextModel::train(&x, &y, &cl, &cfg).unwrap());
    }
}
