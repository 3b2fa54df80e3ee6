use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, example_weights, index_labels, log_softmax, softmax, ModelError, TrainConfig};
use crate::features::FeatureVector;

/// Feature space of a linear model: `sparse_width` binary n-gram columns
/// followed by `dense_width` real columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub sparse_width: usize,
    pub dense_width: usize,
}

impl Layout {
    pub fn width(&self) -> usize {
        self.sparse_width + self.dense_width
    }

    pub fn check(&self, x: &FeatureVector) -> Result<(), ModelError> {
        if let Some(&i) = x.sparse.last() {
            if i as usize >= self.sparse_width {
                return Err(ModelError::Layout(format!("sparse index {i} >= {}", self.sparse_width)));
            }
        }
        if x.dense_width() != self.dense_width {
            return Err(ModelError::Layout(format!(
                "dense width {} != {}",
                x.dense_width(),
                self.dense_width
            )));
        }
        Ok(())
    }
}

/// Multinomial logistic regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub layout: Layout,
    /// `classes × layout.width()`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub lambda: f64,
    pub seed: u64,
}

/// Gradient of the training objective.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(classes: Vec<String>, layout: Layout) -> Self {
        let c = classes.len();
        LinearModel {
            weights: vec![0.0; c * layout.width()],
            bias: vec![0.0; c],
            classes,
            layout,
            lambda: 0.0,
            seed: 0,
        }
    }

    pub fn weight(&self, class: usize, feature: usize) -> f64 {
        self.weights[class * self.layout.width() + feature]
    }

    fn logits_unchecked(&self, x: &FeatureVector) -> Vec<f64> {
        let width = self.layout.width();
        let s = self.layout.sparse_width;
        (0..self.classes.len())
            .map(|c| {
                let row = &self.weights[c * width..(c + 1) * width];
                let mut z = self.bias[c];
                for &j in &x.sparse {
                    z += row[j as usize];
                }
                if let Some(d) = &x.dense {
                    for (k, v) in d.iter().enumerate() {
                        z += row[s + k] * v;
                    }
                }
                z
            })
            .collect()
    }

    pub fn logits(&self, x: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        self.layout.check(x)?;
        Ok(self.logits_unchecked(x))
    }

    pub fn predict_proba(&self, x: &FeatureVector) -> Result<Vec<f64>, ModelError> {
        Ok(softmax(&self.logits(x)?))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<&str, ModelError> {
        let p = self.predict_proba(x)?;
        Ok(&self.classes[argmax(&p)])
    }

    /// Weighted mean cross-entropy plus `(λ/2)‖W‖²` (bias unregularized),
    /// and its gradient.
    pub fn loss_and_grad(
        &self,
        x: &[FeatureVector],
        y: &[usize],
        example_weights: &[f64],
        lambda: f64,
    ) -> (f64, LinearGrad) {
        let width = self.layout.width();
        let s = self.layout.sparse_width;
        let n = x.len() as f64;
        let mut gw: Vec<f64> = self.weights.iter().map(|w| lambda * w).collect();
        let mut gb = vec![0.0; self.classes.len()];
        let mut loss = 0.5 * lambda * self.weights.iter().map(|w| w * w).sum::<f64>();
        for ((xi, &yi), &wi) in x.iter().zip(y).zip(example_weights) {
            let z = self.logits_unchecked(xi);
            let p = softmax(&z);
            loss += wi * -log_softmax(&z, yi) / n;
            for (c, pc) in p.iter().enumerate() {
                let r = wi * (pc - if c == yi { 1.0 } else { 0.0 }) / n;
                gb[c] += r;
                let row = &mut gw[c * width..(c + 1) * width];
                for &j in &xi.sparse {
                    row[j as usize] += r;
                }
                if let Some(d) = &xi.dense {
                    for (k, v) in d.iter().enumerate() {
                        row[s + k] += r * v;
                    }
                }
            }
        }
        (loss, LinearGrad { weights: gw, bias: gb })
    }

    /// Training objective at the current parameters.
    pub fn objective<S: AsRef<str>>(&self, x: &[FeatureVector], y: &[S], cfg: &TrainConfig) -> Result<f64, ModelError> {
        let yi = index_labels(y, &self.classes)?;
        let w = example_weights(&cfg.class_weights, &yi, &self.classes);
        Ok(self.loss_and_grad(x, &yi, &w, cfg.lambda).0)
    }

    /// Fits the model by mini-batch gradient descent.
    pub fn train<S: AsRef<str>>(
        x: &[FeatureVector],
        y: &[S],
        classes: &[String],
        layout: Layout,
        cfg: &TrainConfig,
    ) -> Result<Self, ModelError> {
        Ok(Self::train_with_history(x, y, classes, layout, cfg)?.0)
    }

    /// As [`LinearModel::train`], also returning the objective after each epoch.
    pub fn train_with_history<S: AsRef<str>>(
        x: &[FeatureVector],
        y: &[S],
        classes: &[String],
        layout: Layout,
        cfg: &TrainConfig,
    ) -> Result<(Self, Vec<f64>), ModelError> {
        cfg.validate()?;
        if x.len() != y.len() {
            return Err(ModelError::LengthMismatch { features: x.len(), labels: y.len() });
        }
        let yi = index_labels(y, classes)?;
        for (i, xi) in x.iter().enumerate() {
            layout.check(xi)?;
            if xi.dense.as_ref().is_some_and(|d| d.iter().any(|v| !v.is_finite())) {
                return Err(ModelError::NonFinite(i));
            }
        }
        let weights = example_weights(&cfg.class_weights, &yi, classes);
        let mut model = LinearModel::zeros(classes.to_vec(), layout);
        model.lambda = cfg.lambda;
        model.seed = cfg.seed;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        if cfg.init_scale > 0.0 {
            for w in model.weights.iter_mut() {
                *w = rng.gen_range(-cfg.init_scale..cfg.init_scale);
            }
        }

        let width = layout.width();
        let s = layout.sparse_width;
        let c = classes.len();
        // W = scale · V so the L2 shrink costs O(1) per step
        let mut scale = 1.0f64;
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut history = Vec::with_capacity(cfg.epochs);
        let mut residuals = vec![0.0; c];
        let mut pending: Vec<(usize, Vec<f64>)> = Vec::with_capacity(cfg.batch_size.min(x.len()));
        for epoch in 0..cfg.epochs {
            let lr = cfg.learning_rate_at(epoch);
            order.shuffle(&mut rng);
            for batch in order.chunks(cfg.batch_size) {
                let m = batch.len() as f64;
                pending.clear();
                for &i in batch {
                    let xi = &x[i];
                    for (cl, r) in residuals.iter_mut().enumerate() {
                        let row = &model.weights[cl * width..(cl + 1) * width];
                        let mut z = 0.0;
                        for &j in &xi.sparse {
                            z += row[j as usize];
                        }
                        if let Some(d) = &xi.dense {
                            for (k, v) in d.iter().enumerate() {
                                z += row[s + k] * v;
                            }
                        }
                        *r = scale * z + model.bias[cl];
                    }
                    let p = softmax(&residuals);
                    let coef: Vec<f64> = p
                        .iter()
                        .enumerate()
                        .map(|(cl, pc)| weights[i] * (pc - if cl == yi[i] { 1.0 } else { 0.0 }) / m)
                        .collect();
                    pending.push((i, coef));
                }
                scale *= 1.0 - lr * cfg.lambda;
                for (i, coef) in &pending {
                    let xi = &x[*i];
                    for (cl, &r) in coef.iter().enumerate() {
                        model.bias[cl] -= lr * r;
                        let step = lr * r / scale;
                        let row = &mut model.weights[cl * width..(cl + 1) * width];
                        for &j in &xi.sparse {
                            row[j as usize] -= step;
                        }
                        if let Some(d) = &xi.dense {
                            for (k, v) in d.iter().enumerate() {
                                row[s + k] -= step * v;
                            }
                        }
                    }
                }
                if scale < 1e-6 {
                    model.weights.iter_mut().for_each(|w| *w *= scale);
                    scale = 1.0;
                }
            }
            if scale != 1.0 {
                model.weights.iter_mut().for_each(|w| *w *= scale);
                scale = 1.0;
            }
            history.push(model.loss_and_grad(x, &yi, &weights, cfg.lambda).0);
        }
        if model.weights.iter().chain(&model.bias).any(|w| !w.is_finite()) {
            return Err(ModelError::Config("training diverged; lower the learning rate".into()));
        }
        Ok((model, history))
    }

    /// The `k` features with the largest weight for `class`, ties broken by
    /// ascending feature index.
    pub fn top_features(&self, class: usize, k: usize) -> Vec<(usize, f64)> {
        let width = self.layout.width();
        let row = &self.weights[class * width..(class + 1) * width];
        let mut idx: Vec<(usize, f64)> = row.iter().copied().enumerate().collect();
        idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        idx.truncate(k);
        idx
    }
}
