//! Symmetric 3x3 eigenvalues two independent ways.

/// Eigenvalues in descending order from nalgebra's symmetric solver, with
/// the matching eigenvectors.
pub fn nalgebra_eigen(m: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mat = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    let e = nalgebra::SymmetricEigen::new(mat);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let values = idx.map(|i| e.eigenvalues[i]);
    let vectors = idx.map(|i| {
        let c = e.eigenvectors.column(i);
        [c[0], c[1], c[2]]
    });
    (values, vectors)
}

/// Number of eigenvalues below `x` by Sturm-sequence style LDL^T pivot
/// counting on `m - x I`.
fn count_below(m: [[f64; 3]; 3], x: f64) -> usize {
    let mut a = m;
    for (i, row) in a.iter_mut().enumerate() {
        row[i] -= x;
    }
    let mut negatives = 0;
    let tiny = f64::MIN_POSITIVE.sqrt();
    for k in 0..3 {
        let mut pivot = a[k][k];
        if pivot.abs() < tiny {
            pivot = -tiny;
        }
        if pivot < 0.0 {
            negatives += 1;
        }
        for i in k + 1..3 {
            let f = a[i][k] / pivot;
            for j in k + 1..3 {
                a[i][j] -= f * a[k][j];
            }
        }
    }
    negatives
}

/// Eigenvalues in descending order by bisection on the inertia of
/// `m - x I`. Accurate to a few ulps of the spectral radius.
pub fn bisection_eigenvalues(m: [[f64; 3]; 3]) -> [f64; 3] {
    let radius = (0..3).map(|i| (0..3).map(|j| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut out = [0.0; 3];
    for (k, slot) in out.iter_mut().enumerate() {
        // k-th smallest eigenvalue: smallest x with more than k below it
        let (mut lo, mut hi) = (-radius - 1.0, radius + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if count_below(m, mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        *slot = 0.5 * (lo + hi);
    }
    [out[2], out[1], out[0]]
}
