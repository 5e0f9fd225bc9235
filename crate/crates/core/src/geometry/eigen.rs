//! Eigen-decomposition of symmetric 3x3 matrices.
//!
//! The closed-form (trigonometric) solution is used when the spectrum is well
//! separated. Near-degenerate spectra, where the closed form loses accuracy in
//! both eigenvalues and eigenvectors, fall back to cyclic Jacobi rotations.

use crate::scalar::Scalar;

/// Symmetric 3x3 matrix stored by its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym3<T> {
    pub a00: T,
    pub a01: T,
    pub a02: T,
    pub a11: T,
    pub a12: T,
    pub a22: T,
}

impl<T: Scalar> Sym3<T> {
    pub fn from_rows(m: [[T; 3]; 3]) -> Self {
        Self {
            a00: m[0][0],
            a01: m[0][1],
            a02: m[0][2],
            a11: m[1][1],
            a12: m[1][2],
            a22: m[2][2],
        }
    }

    pub fn to_rows(&self) -> [[T; 3]; 3] {
        [
            [self.a00, self.a01, self.a02],
            [self.a01, self.a11, self.a12],
            [self.a02, self.a12, self.a22],
        ]
    }

    pub fn trace(&self) -> T {
        self.a00 + self.a11 + self.a22
    }

    pub fn frobenius_norm(&self) -> T {
        let two = T::lit(2.0);
        (self.a00 * self.a00
            + self.a11 * self.a11
            + self.a22 * self.a22
            + two * (self.a01 * self.a01 + self.a02 * self.a02 + self.a12 * self.a12))
            .sqrt()
    }

    pub fn mul_vec(&self, v: [T; 3]) -> [T; 3] {
        [
            self.a00 * v[0] + self.a01 * v[1] + self.a02 * v[2],
            self.a01 * v[0] + self.a11 * v[1] + self.a12 * v[2],
            self.a02 * v[0] + self.a12 * v[1] + self.a22 * v[2],
        ]
    }

    /// `v^T A v`.
    pub fn quadratic_form(&self, v: [T; 3]) -> T {
        dot3(v, self.mul_vec(v))
    }

    fn is_finite(&self) -> bool {
        [self.a00, self.a01, self.a02, self.a11, self.a12, self.a22]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// Eigenpairs sorted by descending eigenvalue; `vectors[i]` belongs to
/// `values[i]` and the vectors form an orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen3<T> {
    pub values: [T; 3],
    pub vectors: [[T; 3]; 3],
}

#[inline]
pub(crate) fn dot3<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn cross3<T: Scalar>(a: [T; 3], b: [T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub(crate) fn norm3<T: Scalar>(a: [T; 3]) -> T {
    dot3(a, a).sqrt()
}

#[inline]
fn scale3<T: Scalar>(a: [T; 3], s: T) -> [T; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Relative spectral gap below which the closed form is not trusted.
const CLOSED_FORM_MIN_GAP: f64 = 1e-3;

/// Eigen-decomposition with closed form + Jacobi fallback.
pub fn symmetric_eigen3<T: Scalar>(m: &Sym3<T>) -> SymmetricEigen3<T> {
    closed_form(m).unwrap_or_else(|| jacobi(m))
}

/// Closed-form decomposition; `None` when the spectrum is too close to
/// degenerate for the result to be accurate.
pub fn closed_form<T: Scalar>(m: &Sym3<T>) -> Option<SymmetricEigen3<T>> {
    if !m.is_finite() {
        return None;
    }
    let one = T::one();
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let p1 = m.a01 * m.a01 + m.a02 * m.a02 + m.a12 * m.a12;
    if p1 == T::zero() {
        // Diagonal: eigenvalues are distinct or not, the axes are eigenvectors.
        return Some(sorted(
            [m.a00, m.a11, m.a22],
            [[one, T::zero(), T::zero()], [T::zero(), one, T::zero()], [T::zero(), T::zero(), one]],
        ));
    }
    let q = m.trace() / three;
    let d0 = m.a00 - q;
    let d1 = m.a11 - q;
    let d2 = m.a22 - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + two * p1;
    let p = (p2 / T::lit(6.0)).sqrt();
    // det((A - qI) / p) / 2
    let det = d0 * (d1 * d2 - m.a12 * m.a12) - m.a01 * (m.a01 * d2 - m.a12 * m.a02)
        + m.a02 * (m.a01 * m.a12 - d1 * m.a02);
    let r = (det / (p * p * p) / two).max(-one).min(one);
    let phi = r.acos() / three;
    let l1 = q + two * p * phi.cos();
    let l3 = q + two * p * (phi + two * T::PI() / three).cos();
    let l2 = three * q - l1 - l3;

    let scale = l1.abs().max(l3.abs());
    if !(scale > T::zero()) {
        return None;
    }
    let min_gap = T::lit(CLOSED_FORM_MIN_GAP) * scale;
    if l1 - l2 < min_gap || l2 - l3 < min_gap {
        return None;
    }
    let v1 = null_vector(m, l1)?;
    let v3 = null_vector(m, l3)?;
    // re-orthogonalize against the smallest-eigenvalue vector
    let v1 = {
        let c = dot3(v1, v3);
        let w = [v1[0] - c * v3[0], v1[1] - c * v3[1], v1[2] - c * v3[2]];
        scale3(w, one / norm3(w))
    };
    let v2 = cross3(v3, v1);
    let v2 = scale3(v2, one / norm3(v2));
    Some(SymmetricEigen3 {
        values: [l1, l2, l3],
        vectors: [v1, v2, v3],
    })
}

/// Unit vector spanning the null space of `A - lambda I` (assumed rank 2).
fn null_vector<T: Scalar>(m: &Sym3<T>, lambda: T) -> Option<[T; 3]> {
    let r0 = [m.a00 - lambda, m.a01, m.a02];
    let r1 = [m.a01, m.a11 - lambda, m.a12];
    let r2 = [m.a02, m.a12, m.a22 - lambda];
    let candidates = [cross3(r0, r1), cross3(r0, r2), cross3(r1, r2)];
    let mut best = candidates[0];
    let mut best_norm = dot3(best, best);
    for c in &candidates[1..] {
        let n = dot3(*c, *c);
        if n > best_norm {
            best = *c;
            best_norm = n;
        }
    }
    if !(best_norm > T::zero()) || !best_norm.is_finite() {
        return None;
    }
    Some(scale3(best, one_over_sqrt(best_norm)))
}

#[inline]
fn one_over_sqrt<T: Scalar>(v: T) -> T {
    T::one() / v.sqrt()
}

/// Cyclic Jacobi rotations, accurate for any symmetric input.
pub fn jacobi<T: Scalar>(m: &Sym3<T>) -> SymmetricEigen3<T> {
    let mut a = m.to_rows();
    let mut v = [
        [T::one(), T::zero(), T::zero()],
        [T::zero(), T::one(), T::zero()],
        [T::zero(), T::zero(), T::one()],
    ];
    let norm2 = {
        let n = m.frobenius_norm();
        n * n
    };
    let eps = T::epsilon();
    for _sweep in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off == T::zero() || off <= T::lit(1e-2) * eps * eps * norm2 {
            break;
        }
        for &(p, q) in &[(0usize, 1usize), (0, 2), (1, 2)] {
            if a[p][q] == T::zero() {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
            let sign = if theta >= T::zero() { T::one() } else { -T::one() };
            let t = sign / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            for row in a.iter_mut() {
                let (akp, akq) = (row[p], row[q]);
                row[p] = c * akp - s * akq;
                row[q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vkp, vkq) = (row[p], row[q]);
                row[p] = c * vkp - s * vkq;
                row[q] = s * vkp + c * vkq;
            }
        }
    }
    let columns = [
        [v[0][0], v[1][0], v[2][0]],
        [v[0][1], v[1][1], v[2][1]],
        [v[0][2], v[1][2], v[2][2]],
    ];
    sorted([a[0][0], a[1][1], a[2][2]], columns)
}

fn sorted<T: Scalar>(values: [T; 3], vectors: [[T; 3]; 3]) -> SymmetricEigen3<T> {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap_or(std::cmp::Ordering::Equal));
    SymmetricEigen3 {
        values: [values[idx[0]], values[idx[1]], values[idx[2]]],
        vectors: [vectors[idx[0]], vectors[idx[1]], vectors[idx[2]]],
    }
}
