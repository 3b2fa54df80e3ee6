use rayon::prelude::*;

const CHUNK: usize = 512;
const SQUARINGS: usize = 6;
const MAX_ITERATIONS: usize = 10_000;
const TOLERANCE: f64 = 1e-14;

/// First principal direction of the centered vectors, by power iteration on
/// their covariance matrix.
///
/// Zero vectors are ignored. Returns `None` with fewer than two non-zero
/// vectors or when they have no variance. The sign is fixed so that the
/// largest-magnitude coordinate is positive.
pub fn fit_principal_component(vectors: &[Vec<f64>]) -> Option<Vec<f64>> {
    let usable: Vec<&Vec<f64>> = vectors.iter().filter(|v| v.iter().any(|&x| x != 0.0)).collect();
    if usable.len() < 2 {
        return None;
    }
    let d = usable[0].len();
    let n = usable.len() as f64;
    let mut mean = vec![0.0; d];
    for v in &usable {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    // fixed chunking keeps the reduction order independent of thread count
    let partials: Vec<Vec<f64>> = usable
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut c = vec![0.0; d * d];
            let mut centered = vec![0.0; d];
            for v in chunk {
                for k in 0..d {
                    centered[k] = v[k] - mean[k];
                }
                for i in 0..d {
                    let ci = centered[i];
                    if ci == 0.0 {
                        continue;
                    }
                    let row = &mut c[i * d..(i + 1) * d];
                    for j in i..d {
                        row[j] += ci * centered[j];
                    }
                }
            }
            c
        })
        .collect();
    let mut cov = vec![0.0; d * d];
    for p in &partials {
        for (c, x) in cov.iter_mut().zip(p) {
            *c += x;
        }
    }
    for i in 0..d {
        for j in 0..i {
            cov[i * d + j] = cov[j * d + i];
        }
    }

    let trace: f64 = (0..d).map(|i| cov[i * d + i]).sum();
    let scale: f64 = usable.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>()).sum();
    if trace <= 1e-20 * scale {
        return None;
    }
    Some(dominant_eigenvector(&cov, d))
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for k in 0..d {
            let aik = a[i * d + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..d {
                out[i * d + j] += aik * b[k * d + j];
            }
        }
    }
    out
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Power iteration for a symmetric positive semi-definite matrix. Repeated
/// squaring first widens the eigengap and supplies a start vector with a
/// non-zero component along the dominant direction.
fn dominant_eigenvector(cov: &[f64], d: usize) -> Vec<f64> {
    let mut m = cov.to_vec();
    for _ in 0..SQUARINGS {
        m = matmul(&m, &m, d);
        let f = m.iter().map(|x| x * x).sum::<f64>().sqrt();
        if f == 0.0 || !f.is_finite() {
            break;
        }
        m.iter_mut().for_each(|x| *x /= f);
    }
    let best_row = (0..d)
        .max_by(|&a, &b| {
            let na: f64 = m[a * d..(a + 1) * d].iter().map(|x| x * x).sum();
            let nb: f64 = m[b * d..(b + 1) * d].iter().map(|x| x * x).sum();
            na.total_cmp(&nb).then(b.cmp(&a))
        })
        .unwrap_or(0);
    let mut v = m[best_row * d..(best_row + 1) * d].to_vec();
    if normalize(&mut v) == 0.0 {
        v = vec![0.0; d];
        v[best_row] = 1.0;
    }
    for _ in 0..MAX_ITERATIONS {
        let mut next: Vec<f64> = (0..d).map(|i| (0..d).map(|j| cov[i * d + j] * v[j]).sum()).collect();
        if normalize(&mut next) == 0.0 {
            break;
        }
        let delta: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < TOLERANCE {
            break;
        }
    }
    let pivot = (0..d).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a))).unwrap_or(0);
    if v[pivot] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}
