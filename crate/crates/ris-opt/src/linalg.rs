//! Small dense complex linear algebra used by the RZF precoder.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Result, RisError};

/// Inverse of a small square complex matrix via Gauss-Jordan elimination with
/// partial pivoting.
pub fn invert(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(RisError::ShapeMismatch(format!(
            "invert expects a square matrix, got {:?}",
            a.dim()
        )));
    }
    let mut work = a.clone();
    let mut inv = Array2::<Complex64>::eye(n);

    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&i, &j| {
                work[[i, col]]
                    .norm_sqr()
                    .partial_cmp(&work[[j, col]].norm_sqr())
                    .unwrap()
            })
            .unwrap();
        let pivot = work[[pivot_row, col]];
        if pivot.norm_sqr() < f64::MIN_POSITIVE {
            return Err(RisError::Numerical(
                "singular matrix in RZF regularized Gram inverse".into(),
            ));
        }
        if pivot_row != col {
            for j in 0..n {
                work.swap([pivot_row, j], [col, j]);
                inv.swap([pivot_row, j], [col, j]);
            }
        }
        let inv_pivot = Complex64::new(1.0, 0.0) / pivot;
        for j in 0..n {
            work[[col, j]] *= inv_pivot;
            inv[[col, j]] *= inv_pivot;
        }
        for i in 0..n {
            if i == col {
                continue;
            }
            let factor = work[[i, col]];
            if factor == Complex64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                let w = work[[col, j]];
                let v = inv[[col, j]];
                work[[i, j]] -= factor * w;
                inv[[i, j]] -= factor * v;
            }
        }
    }
    Ok(inv)
}

/// Conjugate transpose.
pub fn hermitian(a: &Array2<Complex64>) -> Array2<Complex64> {
    let (r, c) = a.dim();
    Array2::from_shape_fn((c, r), |(i, j)| a[[j, i]].conj())
}
