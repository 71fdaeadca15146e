//! Backward error of a computed factor.

use crate::matrix::Matrix;

/// `||A - L L^T||_F / ||A||_F` in double precision.
///
/// Only the lower triangle of `l` is read, so the factor can be passed in the
/// buffer it was computed in. Returns NaN if either input holds a non-finite
/// value.
pub fn factorization_error(a: &Matrix, l: &Matrix) -> f64 {
    assert!(a.is_square() && l.is_square() && a.rows() == l.rows(), "shape mismatch");
    let n = a.rows();
    if !a.is_finite() || !(0..n).all(|j| (j..n).all(|i| l[(i, j)].is_finite())) {
        return f64::NAN;
    }
    // rows of L, contiguous
    let mut rows = vec![0.0; n * n];
    for j in 0..n {
        for i in j..n {
            rows[i * n + j] = l[(i, j)];
        }
    }
    let mut residual = 0.0;
    for j in 0..n {
        let lj = &rows[j * n..j * n + j + 1];
        for i in j..n {
            let li = &rows[i * n..i * n + j + 1];
            let llt: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
            let d = a[(i, j)] - llt;
            residual += d * d;
            if i != j {
                let d = a[(j, i)] - llt;
                residual += d * d;
            }
        }
    }
    let norm = a.frobenius_norm();
    residual.sqrt() / norm
}

/// Correct decimal digits, `-log10(rel_error)`.
pub fn digits(rel_error: f64) -> f64 {
    -rel_error.log10()
}
