use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    /// `confusion[gold][predicted]` over the class list.
    pub confusion: Vec<Vec<usize>>,
}

impl MetricsReport {
    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.class == name)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision, recall and F1 with macro averages over `classes`.
/// Zero denominators give 0, and classes absent from the data still count
/// toward the macro mean.
pub fn metrics<G: AsRef<str>, P: AsRef<str>, C: AsRef<str>>(
    gold: &[G],
    predicted: &[P],
    classes: &[C],
) -> Result<MetricsReport, EvalError> {
    if gold.len() != predicted.len() {
        return Err(EvalError::LengthMismatch { gold: gold.len(), predicted: predicted.len() });
    }
    if gold.is_empty() || classes.is_empty() {
        return Err(EvalError::Empty);
    }
    let position = |l: &str| {
        classes
            .iter()
            .position(|c| c.as_ref() == l)
            .ok_or_else(|| EvalError::UnknownLabel(l.to_string()))
    };
    let k = classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (g, p) in gold.iter().zip(predicted) {
        confusion[position(g.as_ref())?][position(p.as_ref())?] += 1;
    }
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
            ClassMetrics { class: classes[c].as_ref().to_string(), precision, recall, f1, support }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    Ok(MetricsReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        per_class,
        confusion,
    })
}
