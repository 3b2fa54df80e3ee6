mod common;

use claimgram_core::models::{argmax, softmax, LinearModel, TrainConfig};
use common::optim::{fasttext_gradient_error, linear_gradient_error, random_fasttext_instance, random_linear_instance, toy_suite};
use proptest::prelude::*;

fn converge(seed: u64, init_scale: f64) -> TrainConfig {
    TrainConfig {
        lambda: 0.1,
        learning_rate: 0.5,
        decay: 1.0,
        decay_every: 1,
        epochs: 3000,
        batch_size: usize::MAX,
        seed,
        init_scale,
        ..Default::default()
    }
}

#[test]
fn convex_objective_reconverges_from_different_seeds() {
    for (x, y, layout) in toy_suite() {
        let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let a = LinearModel::train(&x, &y, &classes, layout, &converge(1, 0.0)).unwrap();
        let b = LinearModel::train(&x, &y, &classes, layout, &converge(2, 1.0)).unwrap();
        let la = a.objective(&x, &y, &converge(1, 0.0)).unwrap();
        let lb = b.objective(&x, &y, &converge(2, 1.0)).unwrap();
        assert!((la - lb).abs() <= 1e-6, "{la} vs {lb}");
    }
}

#[test]
fn default_schedule_decreases_loss_each_epoch() {
    for (x, y, layout) in toy_suite() {
        let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let (_, h) = LinearModel::train_with_history(&x, &y, &classes, layout, &TrainConfig::default()).unwrap();
        assert!(h.windows(2).all(|w| w[1] <= w[0]), "{h:?}");
    }
}

proptest! {
    #[test]
    fn linear_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = linear_gradient_error(&random_linear_instance(seed));
        prop_assert!(e <= 1e-4, "relative error {}", e);
    }

    #[test]
    fn fasttext_gradient_matches_finite_differences(seed in any::<u64>()) {
        let e = fasttext_gradient_error(&random_fasttext_instance(seed));
        prop_assert!(e <= 1e-4, "relative error {}", e);
    }

    #[test]
    fn softmax_normalized_and_shift_invariant(
        logits in prop::collection::vec(-50.0f64..50.0, 1..8),
        shift in -1e3f64..1e3,
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        prop_assert_eq!(argmax(&softmax(&shifted)), argmax(&p));
    }
}
