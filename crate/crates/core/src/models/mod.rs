//! Linear claim classifiers and the strategies that compose them.

mod bundle;
mod fasttext;
mod linear;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bundle::{
    BundleConfig, Component, Family, ModelBundle, Prediction, Strategy, ARGUMENT, BUNDLE_FORMAT_VERSION,
    ENSEMBLE_PROBABILITIES,
};
pub use fasttext::{FastTextConfig, FastTextGrad, FastTextModel};
pub use linear::{Layout, LinearGrad, LinearModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("no training examples")]
    Empty,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("label {0:?} is not one of the model classes")]
    UnknownLabel(String),
    #[error("non-finite feature value in example {0}")]
    NonFinite(usize),
    #[error("feature layout mismatch: {0}")]
    Layout(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("bundle strategy is {actual:?}, not {expected:?}")]
    WrongStrategy { expected: Strategy, actual: Strategy },
    #[error("bundle is missing component {0:?}")]
    MissingComponent(String),
    #[error("{0:?} is not supported for the {1:?} family")]
    Unsupported(Strategy, Family),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model bundle: {0}")]
    Format(String),
}

/// How per-example loss weights are derived from the labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeights {
    Uniform,
    /// Inversely proportional to class frequency.
    #[default]
    Balanced,
    Explicit(BTreeMap<String, f64>),
}

/// Mini-batch gradient descent settings shared by both model families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// L2 strength on the weight matrix.
    pub lambda: f64,
    pub learning_rate: f64,
    /// Multiplier applied to the learning rate every `decay_every` epochs.
    pub decay: f64,
    pub decay_every: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub class_weights: ClassWeights,
    /// Half-width of the uniform initial weight distribution; 0 starts at zero.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-5,
            learning_rate: 0.5,
            decay: 0.5,
            decay_every: 5,
            epochs: 10,
            batch_size: 32,
            seed: 0,
            class_weights: ClassWeights::Balanced,
            init_scale: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::Config(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.learning_rate * self.lambda >= 1.0 {
            return bad("learning_rate * lambda must be below 1");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) || self.decay_every == 0 {
            return bad("decay must be in (0, 1] with decay_every >= 1");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be at least 1");
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad("init scale must be finite and >= 0");
        }
        if let ClassWeights::Explicit(w) = &self.class_weights {
            if w.values().any(|&x| !(x > 0.0 && x.is_finite())) {
                return bad("class weights must be positive");
            }
        }
        Ok(())
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi((epoch / self.decay_every) as i32)
    }
}

/// `w_c = N / (K · n_c)` over the `K` classes present in `labels`.
pub fn balanced_weights<S: AsRef<str>>(labels: &[S]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(l.as_ref().to_string()).or_default() += 1;
    }
    let n = labels.len() as f64;
    let k = counts.len() as f64;
    counts.into_iter().map(|(c, nc)| (c, n / (k * nc as f64))).collect()
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|e| e / sum).collect()
}

/// `log softmax(z)[k]`, computed without overflow.
pub(crate) fn log_softmax(z: &[f64], k: usize) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    z[k] - lse
}

/// Index of the largest value; the first one on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Per-example weights under `scheme` for labels indexed into `classes`.
pub(crate) fn example_weights(scheme: &ClassWeights, labels: &[usize], classes: &[String]) -> Vec<f64> {
    let per_class: Vec<f64> = match scheme {
        ClassWeights::Uniform => vec![1.0; classes.len()],
        ClassWeights::Balanced => {
            let names: Vec<&str> = labels.iter().map(|&l| classes[l].as_str()).collect();
            let w = balanced_weights(&names);
            classes.iter().map(|c| w.get(c).copied().unwrap_or(1.0)).collect()
        }
        ClassWeights::Explicit(w) => classes.iter().map(|c| w.get(c).copied().unwrap_or(1.0)).collect(),
    };
    labels.iter().map(|&l| per_class[l]).collect()
}

/// Maps string labels onto `classes`, checking that at least two classes occur.
pub(crate) fn index_labels<S: AsRef<str>>(labels: &[S], classes: &[String]) -> Result<Vec<usize>, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::Empty);
    }
    let idx: Vec<usize> = labels
        .iter()
        .map(|l| {
            classes
                .iter()
                .position(|c| c == l.as_ref())
                .ok_or_else(|| ModelError::UnknownLabel(l.as_ref().to_string()))
        })
        .collect::<Result<_, _>>()?;
    if idx.iter().all(|&i| i == idx[0]) {
        return Err(ModelError::SingleClass);
    }
    Ok(idx)
}
