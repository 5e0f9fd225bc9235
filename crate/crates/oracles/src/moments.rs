//! Two-pass mean and sample covariance.

/// Mean and `sum (p - mean)(p - mean)^T / (n - 1)` of the points.
pub fn batch_moments(points: &[[f64; 3]]) -> Option<([f64; 3], [[f64; 3]; 3])> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mut mean = [0.0; 3];
    for p in points {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    mean = mean.map(|s| s / n);
    let mut cov = [[0.0; 3]; 3];
    for p in points {
        let d = [p[0] - mean[0], p[1] - mean[1], p[2] - mean[2]];
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += d[i] * d[j];
            }
        }
    }
    for row in &mut cov {
        for v in row.iter_mut() {
            *v /= n - 1.0;
        }
    }
    Some((mean, cov))
}
