use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ngrams;

pub const DEFAULT_BUCKETS: u64 = 2_000_000;

pub fn fnv1a64(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Bucket of every unigram and bigram, in `ngrams` order.
pub fn hashed_buckets(tokens: &[String], buckets: u64) -> Vec<u64> {
    ngrams(tokens).iter().map(|g| fnv1a64(g) % buckets).collect()
}

/// A `buckets × dim` embedding matrix stored sparsely. Rows that were never
/// written hold a deterministic initial value derived from `(seed, bucket)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketMatrix {
    pub dim: usize,
    pub buckets: u64,
    pub seed: u64,
    pub init_scale: f64,
    #[serde(with = "row_pairs")]
    rows: BTreeMap<u64, Vec<f64>>,
}

// Integer map keys do not survive internally tagged enums, so rows go on the
// wire as `[bucket, row]` pairs.
mod row_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rows: &BTreeMap<u64, Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(rows.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u64, Vec<f64>>, D::Error> {
        Ok(Vec::<(u64, Vec<f64>)>::deserialize(d)?.into_iter().collect())
    }
}

impl BucketMatrix {
    pub fn new(dim: usize, buckets: u64, seed: u64, init_scale: f64) -> Self {
        BucketMatrix {
            dim,
            buckets,
            seed,
            init_scale,
            rows: BTreeMap::new(),
        }
    }

    pub fn initial_row(&self, bucket: u64) -> Vec<f64> {
        if self.init_scale == 0.0 {
            return vec![0.0; self.dim];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ bucket.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        (0..self.dim).map(|_| rng.gen_range(-self.init_scale..self.init_scale)).collect()
    }

    pub fn row(&self, bucket: u64) -> std::borrow::Cow<'_, [f64]> {
        match self.rows.get(&bucket) {
            Some(r) => std::borrow::Cow::Borrowed(r.as_slice()),
            None => std::borrow::Cow::Owned(self.initial_row(bucket)),
        }
    }

    pub fn row_mut(&mut self, bucket: u64) -> &mut Vec<f64> {
        if !self.rows.contains_key(&bucket) {
            let init = self.initial_row(bucket);
            self.rows.insert(bucket, init);
        }
        self.rows.get_mut(&bucket).expect("row inserted")
    }

    pub fn stored_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Mean of the bucket vectors of every unigram and bigram; zero for an empty
/// sentence.
pub fn hashed_avg_embed(tokens: &[String], matrix: &BucketMatrix) -> Vec<f64> {
    let ids = hashed_buckets(tokens, matrix.buckets);
    let mut v = vec![0.0; matrix.dim];
    for &b in &ids {
        for (acc, x) in v.iter_mut().zip(matrix.row(b).iter()) {
            *acc += x;
        }
    }
    if !ids.is_empty() {
        v.iter_mut().for_each(|x| *x /= ids.len() as f64);
    }
    v
}
