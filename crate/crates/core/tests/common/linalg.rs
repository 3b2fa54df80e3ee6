//! Closed-form reference computations.

/// Unit eigenvector of the largest eigenvalue of the symmetric 2×2 matrix
/// `[[a, b], [b, c]]`, sign fixed so the largest-magnitude coordinate is
/// positive.
pub fn top_eigenvector_2x2(a: f64, b: f64, c: f64) -> [f64; 2] {
    let lambda = (a + c) / 2.0 + (((a - c) / 2.0).powi(2) + b * b).sqrt();
    // (A - λI)x = 0; pick the better-conditioned row
    let (x, y) = if (a - lambda).abs() + b.abs() >= (c - lambda).abs() + b.abs() {
        (b, lambda - a)
    } else {
        (lambda - c, b)
    };
    let (x, y) = if x == 0.0 && y == 0.0 { (1.0, 0.0) } else { (x, y) };
    let n = (x * x + y * y).sqrt();
    let (x, y) = (x / n, y / n);
    if x.abs() >= y.abs() {
        if x < 0.0 { [-x, -y] } else { [x, y] }
    } else if y < 0.0 {
        [-x, -y]
    } else {
        [x, y]
    }
}

/// Population covariance entries `(s_xx, s_xy, s_yy)` of 2-D points.
pub fn covariance_2d(points: &[[f64; 2]]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mut s = (0.0, 0.0, 0.0);
    for p in points {
        let (dx, dy) = (p[0] - mx, p[1] - my);
        s.0 += dx * dx;
        s.1 += dx * dy;
        s.2 += dy * dy;
    }
    (s.0 / n, s.1 / n, s.2 / n)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
