use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {n} sentences in the pool")]
    TooManyClusters { k: usize, n: usize },
    #[error("{ids} sentence ids but {vectors} embeddings")]
    LengthMismatch { ids: usize, vectors: usize },
    #[error("embedding {index} has width {width}, expected {expected}")]
    WidthMismatch { index: usize, width: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub members: Vec<u64>,
    /// Members nearest the centroid by cosine similarity, nearest first.
    pub exemplars: Vec<u64>,
    pub centroid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    /// Cluster index per input sentence, in input order.
    pub assignment: Vec<usize>,
}

const MAX_ITERATIONS: usize = 100;

fn normalized(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter().map(|x| x / norm).collect()
    } else {
        v.to_vec()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spherical k-means over sentence embeddings with k-means++ seeding.
///
/// Every sentence lands in exactly one non-empty cluster. Each cluster
/// reports up to `exemplars` members closest to its centroid, ties broken by
/// sentence id. Deterministic for a fixed `seed`.
pub fn cluster_candidates(
    sentence_ids: &[u64],
    embeddings: &[Vec<f64>],
    k: usize,
    exemplars: usize,
    seed: u64,
) -> Result<Clustering, ClusterError> {
    let n = sentence_ids.len();
    if k == 0 {
        return Err(ClusterError::ZeroK);
    }
    if embeddings.len() != n {
        return Err(ClusterError::LengthMismatch { ids: n, vectors: embeddings.len() });
    }
    if k > n {
        return Err(ClusterError::TooManyClusters { k, n });
    }
    let dim = embeddings[0].len();
    if let Some((index, v)) = embeddings.iter().enumerate().find(|(_, v)| v.len() != dim) {
        return Err(ClusterError::WidthMismatch { index, width: v.len(), expected: dim });
    }

    let points: Vec<Vec<f64>> = embeddings.iter().map(|v| normalized(v)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(&points, k, &mut rng);
    let mut assignment = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut next = assign(&points, &centroids);
        fill_empty(&points, &centroids, &mut next, k);
        let done = next == assignment;
        assignment = next;
        centroids = update(&points, &assignment, k, dim);
        if done {
            break;
        }
    }

    let clusters = (0..k)
        .map(|c| {
            let mut members: Vec<(f64, u64)> = (0..n)
                .filter(|&i| assignment[i] == c)
                .map(|i| (dot(&points[i], &centroids[c]), sentence_ids[i]))
                .collect();
            let ids: Vec<u64> = members.iter().map(|m| m.1).collect();
            members.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            Cluster {
                members: ids,
                exemplars: members.iter().take(exemplars).map(|m| m.1).collect(),
                centroid: centroids[c].clone(),
            }
        })
        .collect();
    Ok(Clustering { clusters, assignment })
}

fn seed_centroids(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut dist: Vec<f64> = points.iter().map(|p| 1.0 - dot(p, &points[chosen[0]])).collect();
    while chosen.len() < k {
        let weights: Vec<f64> = dist
            .iter()
            .enumerate()
            .map(|(i, d)| if chosen.contains(&i) { 0.0 } else { d.max(0.0).powi(2) })
            .collect();
        let total: f64 = weights.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = None;
            for (i, w) in weights.iter().enumerate() {
                if *w > 0.0 {
                    pick = Some(i);
                    if r < *w {
                        break;
                    }
                    r -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // remaining points coincide with chosen ones
            let free: Vec<usize> = (0..n).filter(|i| !chosen.contains(i)).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen.push(pick);
        for (i, p) in points.iter().enumerate() {
            dist[i] = dist[i].min(1.0 - dot(p, &points[pick]));
        }
    }
    chosen.iter().map(|&i| points[i].clone()).collect()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let s = dot(p, centroid);
                if s > best_sim {
                    best = c;
                    best_sim = s;
                }
            }
            best
        })
        .collect()
}

/// Moves the worst-fitting point of a multi-member cluster into each empty one.
fn fill_empty(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &mut [usize], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignment.iter() {
        sizes[a] += 1;
    }
    for c in 0..k {
        if sizes[c] > 0 {
            continue;
        }
        let donor = (0..points.len())
            .filter(|&i| sizes[assignment[i]] > 1)
            .min_by(|&i, &j| {
                dot(&points[i], &centroids[assignment[i]])
                    .total_cmp(&dot(&points[j], &centroids[assignment[j]]))
                    .then(i.cmp(&j))
            })
            .expect("k <= n leaves a cluster with spare members");
        sizes[assignment[donor]] -= 1;
        assignment[donor] = c;
        sizes[c] = 1;
    }
}

fn update(points: &[Vec<f64>], assignment: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    for (p, &a) in points.iter().zip(assignment) {
        for (s, x) in sums[a].iter_mut().zip(p) {
            *s += x;
        }
    }
    sums.iter().map(|s| normalized(s)).collect()
}
