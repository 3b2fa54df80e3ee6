use rand::Rng;

/// (precision, recall, f1)
pub type Prf = (f64, f64, f64);

/// Per-class and macro triples from an explicit confusion matrix.
pub fn brute_force(gold: &[usize], predicted: &[usize], k: usize) -> (Vec<Prf>, Prf) {
    let mut m = vec![vec![0usize; k]; k];
    for (&g, &p) in gold.iter().zip(predicted) {
        m[g][p] += 1;
    }
    let mut per = Vec::new();
    for (c, row) in m.iter().enumerate() {
        let tp = row[c] as f64;
        let pred: usize = m.iter().map(|r| r[c]).sum();
        let actual: usize = row.iter().sum();
        let p = if pred == 0 { 0.0 } else { tp / pred as f64 };
        let r = if actual == 0 { 0.0 } else { tp / actual as f64 };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        per.push((p, r, f));
    }
    let mean = |sel: fn(&Prf) -> f64| per.iter().map(sel).sum::<f64>() / k as f64;
    let macro_avg = (mean(|t| t.0), mean(|t| t.1), mean(|t| t.2));
    (per, macro_avg)
}

pub fn random_prediction_set(rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>, usize) {
    let k = rng.gen_range(1..8);
    let n = rng.gen_range(1..200);
    let skew = rng.gen_range(0.0..1.0);
    let gold: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let predicted = gold
        .iter()
        .map(|&g| if rng.gen_bool(skew) { g } else { rng.gen_range(0..k) })
        .collect();
    (gold, predicted, k)
}
