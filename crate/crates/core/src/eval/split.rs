use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train: 0.70, dev: 0.15, test: 0.15, seed: 0 }
    }
}

/// Example indices of each part, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per-class sizes of the three parts by largest-remainder rounding.
/// Remainders equal within 1e-9 go to train, then dev, then test.
pub(crate) fn allocate(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    let targets = fractions.map(|f| f * n as f64);
    let mut sizes = targets.map(|t| t.floor() as usize);
    let mut left = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (ra, rb) = (targets[a] - targets[a].floor(), targets[b] - targets[b].floor());
        if (ra - rb).abs() <= 1e-9 {
            a.cmp(&b)
        } else {
            rb.total_cmp(&ra)
        }
    });
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        sizes[k] += 1;
        left -= 1;
    }
    sizes
}

/// Partitions examples into train/dev/test, stratified by label.
///
/// Each class is shuffled under the seed (classes visited in sorted order)
/// and cut at the sizes given by largest-remainder rounding of the
/// configured fractions.
pub fn stratified_split<L: Ord + ToString>(labels: &[L], cfg: &SplitConfig) -> Result<Split, EvalError> {
    let fractions = [cfg.train, cfg.dev, cfg.test];
    if fractions.iter().any(|f| !(*f > 0.0 && f.is_finite())) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(EvalError::SplitConfig(format!("{fractions:?} must be positive and sum to 1")));
    }
    let mut by_class: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    if let Some((class, members)) = by_class.iter().find(|(_, m)| m.len() < 3) {
        return Err(EvalError::ClassTooSmall { class: class.to_string(), count: members.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut split = Split { train: Vec::new(), dev: Vec::new(), test: Vec::new() };
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let [a, b, _] = allocate(members.len(), fractions);
        split.train.extend_from_slice(&members[..a]);
        split.dev.extend_from_slice(&members[a..a + b]);
        split.test.extend_from_slice(&members[a + b..]);
    }
    split.train.sort_unstable();
    split.dev.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
