use std::path::PathBuf;

use claimgram_core::features::EmbeddingTable;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy_vectors.txt")
}

pub fn toy_table() -> EmbeddingTable {
    EmbeddingTable::load(&fixture_path()).unwrap()
}

/// Random sentences over the fixture words plus one out-of-table word.
pub fn fixture_sentences(n: usize, seed: u64) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(fixture_path()).unwrap();
    let mut words: Vec<String> = text.lines().skip(1).map(|l| l.split(' ').next().unwrap().to_string()).collect();
    words.push("unknownword".into());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..rng.gen_range(0..15)).map(|_| words.choose(&mut rng).unwrap().clone()).collect())
        .collect()
}

/// An elongated, rotated and shifted 2-D point cloud.
pub fn random_cloud(seed: u64) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sx = rng.gen_range(0.5..3.0);
    let sy = rng.gen_range(0.1..0.45) * sx;
    let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
    (0..rng.gen_range(5..40))
        .map(|_| {
            let (a, b) = (rng.gen_range(-1.0..1.0) * sx, rng.gen_range(-1.0..1.0) * sy);
            [a * angle.cos() - b * angle.sin() + 0.3, a * angle.sin() + b * angle.cos() - 1.0]
        })
        .collect()
}
