//! Finite-difference gradient checks and toy convex problems.

use claimgram_core::features::FeatureVector;
use claimgram_core::models::{FastTextModel, Layout, LinearModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, or 0 when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

pub struct LinearInstance {
    pub model: LinearModel,
    pub x: Vec<FeatureVector>,
    pub y: Vec<usize>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

pub fn random_linear_instance(seed: u64) -> LinearInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(2..=4);
    let layout = Layout { sparse_width: rng.gen_range(1..=6), dense_width: rng.gen_range(0..=3) };
    let classes = (0..c).map(|i| format!("c{i}")).collect();
    let mut model = LinearModel::zeros(classes, layout);
    for w in model.weights.iter_mut().chain(model.bias.iter_mut()) {
        *w = rng.gen_range(-1.0..1.0);
    }
    let n = rng.gen_range(2..=6);
    let x = (0..n)
        .map(|_| {
            let sparse = (0..layout.sparse_width as u32).filter(|_| rng.gen_bool(0.5)).collect();
            let dense = (layout.dense_width > 0).then(|| (0..layout.dense_width).map(|_| rng.gen_range(-2.0..2.0)).collect());
            FeatureVector { sparse, dense }
        })
        .collect();
    let y = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let weights = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
    LinearInstance { model, x, y, weights, lambda: rng.gen_range(0.0..0.5) }
}

/// Relative error between the analytic gradient and central differences.
pub fn linear_gradient_error(inst: &LinearInstance) -> f64 {
    let loss = |m: &LinearModel| m.loss_and_grad(&inst.x, &inst.y, &inst.weights, inst.lambda).0;
    let (_, g) = inst.model.loss_and_grad(&inst.x, &inst.y, &inst.weights, inst.lambda);
    let mut analytic = g.weights.clone();
    analytic.extend(&g.bias);
    let mut numeric = Vec::new();
    for k in 0..inst.model.weights.len() + inst.model.bias.len() {
        let mut plus = inst.model.clone();
        let mut minus = inst.model.clone();
        let nw = plus.weights.len();
        if k < nw {
            plus.weights[k] += H;
            minus.weights[k] -= H;
        } else {
            plus.bias[k - nw] += H;
            minus.bias[k - nw] -= H;
        }
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * H));
    }
    relative_error(&analytic, &numeric)
}

pub struct FastTextInstance {
    pub model: FastTextModel,
    pub x: Vec<Vec<String>>,
    pub y: Vec<usize>,
    pub weights: Vec<f64>,
    pub lambda: f64,
}

/// A 3-bucket, 2-dimensional model with random parameters.
pub fn random_fasttext_instance(seed: u64) -> FastTextInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = rng.gen_range(2..=3);
    let mut model = FastTextModel::new((0..c).map(|i| format!("c{i}")).collect(), 2, 3, seed);
    for w in model.output.iter_mut().chain(model.bias.iter_mut()) {
        *w = rng.gen_range(-1.0..1.0);
    }
    for b in 0..3 {
        for v in model.embeddings.row_mut(b).iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let words = ["p", "q", "r", "s"];
    let n = rng.gen_range(2..=5);
    let x = (0..n)
        .map(|_| (0..rng.gen_range(0..=4)).map(|_| words[rng.gen_range(0..4)].to_string()).collect())
        .collect();
    let y = (0..n).map(|_| rng.gen_range(0..c)).collect();
    let weights = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
    FastTextInstance { model, x, y, weights, lambda: rng.gen_range(0.0..0.5) }
}

pub fn fasttext_gradient_error(inst: &FastTextInstance) -> f64 {
    let loss = |m: &FastTextModel| m.loss_and_grad(&inst.x, &inst.y, &inst.weights, inst.lambda).0;
    let (_, g) = inst.model.loss_and_grad(&inst.x, &inst.y, &inst.weights, inst.lambda);
    let mut analytic = g.output.clone();
    analytic.extend(&g.bias);
    for b in 0..3 {
        analytic.extend(g.rows.get(&b).cloned().unwrap_or_else(|| vec![0.0; 2]));
    }
    let mut numeric = Vec::new();
    let no = inst.model.output.len();
    let nb = inst.model.bias.len();
    for k in 0..no + nb + 6 {
        let mut plus = inst.model.clone();
        let mut minus = inst.model.clone();
        let nudge = |m: &mut FastTextModel, h: f64| {
            if k < no {
                m.output[k] += h;
            } else if k < no + nb {
                m.bias[k - no] += h;
            } else {
                let r = k - no - nb;
                m.embeddings.row_mut((r / 2) as u64)[r % 2] += h;
            }
        };
        nudge(&mut plus, H);
        nudge(&mut minus, -H);
        numeric.push((loss(&plus) - loss(&minus)) / (2.0 * H));
    }
    relative_error(&analytic, &numeric)
}

/// Small labeled problems with sparse and dense columns, some not separable.
pub fn toy_suite() -> Vec<(Vec<FeatureVector>, Vec<String>, Layout)> {
    let mut out = Vec::new();
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let layout = Layout { sparse_width: 5, dense_width: 2 };
        let classes = ["a", "b", "c"];
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..30 {
            let c = i % 3;
            let mut sparse: Vec<u32> = (0..5u32).filter(|&j| rng.gen_bool(if j as usize == c { 0.8 } else { 0.3 })).collect();
            sparse.dedup();
            let dense = vec![c as f64 + rng.gen_range(-1.5..1.5), rng.gen_range(-1.0..1.0)];
            x.push(FeatureVector { sparse, dense: Some(dense) });
            y.push(classes[c].to_string());
        }
        out.push((x, y, layout));
    }
    out
}
