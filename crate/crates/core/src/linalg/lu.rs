use num_complex::Complex64;

use super::{cholesky, require_square, ComplexMatrix, LinalgError};

/// In-place LU with partial pivoting. Returns the permutation sign, or `None`
/// when a pivot is exactly zero.
fn lu_in_place(a: &mut ComplexMatrix, perm: &mut [usize]) -> Option<f64> {
    let n = a.rows();
    let mut sign = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[(i, k)].norm().total_cmp(&a[(j, k)].norm()))
            .unwrap_or(k);
        if a[(p, k)].norm() == 0.0 {
            return None;
        }
        if p != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(p, j)];
                a[(p, j)] = t;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = a[(k, k)];
        for i in k + 1..n {
            let f = a[(i, k)] / pivot;
            a[(i, k)] = f;
            for j in k + 1..n {
                let d = f * a[(k, j)];
                a[(i, j)] -= d;
            }
        }
    }
    Some(sign)
}

/// Determinant via partially pivoted LU.
pub fn determinant(a: &ComplexMatrix) -> Result<Complex64, LinalgError> {
    let n = require_square("determinant", a)?;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    match lu_in_place(&mut lu, &mut perm) {
        None => Ok(Complex64::new(0.0, 0.0)),
        Some(sign) => Ok((0..n).map(|i| lu[(i, i)]).product::<Complex64>() * sign),
    }
}

/// Solves `a·x = b` for a square `a` and any number of right-hand sides.
pub fn solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = require_square("solve", a)?;
    if b.rows() != n {
        return Err(LinalgError::DimensionMismatch {
            op: "solve",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    lu_in_place(&mut lu, &mut perm).ok_or(LinalgError::Singular)?;
    let scale = a.max_abs();
    if (0..n).any(|i| lu[(i, i)].norm() <= 1e-15 * scale) {
        return Err(LinalgError::Singular);
    }
    let mut x = ComplexMatrix::from_fn(n, b.cols(), |i, j| b[(perm[i], j)]);
    for j in 0..b.cols() {
        for i in 0..n {
            let mut s = x[(i, j)];
            for k in 0..i {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[(i, j)];
            for k in i + 1..n {
                s -= lu[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s / lu[(i, i)];
        }
    }
    Ok(x)
}

pub fn inverse(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let n = require_square("inverse", a)?;
    solve(a, &ComplexMatrix::identity(n))
}

/// `ln det a` for a Hermitian positive-definite matrix.
pub fn log_det_hpd(a: &ComplexMatrix) -> Result<f64, LinalgError> {
    Ok(cholesky(a)?.log_det())
}

/// `det(a + b)` for two triangular matrices of the same orientation, evaluated as
/// the product of summed diagonals.
pub fn det_triangular_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<Complex64, LinalgError> {
    let n = require_square("det_triangular_sum", a)?;
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            op: "det_triangular_sum",
            left: a.shape(),
            right: b.shape(),
        });
    }
    let both_lower = a.is_lower_triangular(0.0) && b.is_lower_triangular(0.0);
    let both_upper = a.is_upper_triangular(0.0) && b.is_upper_triangular(0.0);
    if !both_lower && !both_upper {
        return Err(LinalgError::TriangularOrientation);
    }
    Ok((0..n).map(|i| a[(i, i)] + b[(i, i)]).product())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triangular_sum_examples() {
        let i2 = ComplexMatrix::identity(2);
        assert_eq!(det_triangular_sum(&i2, &i2).unwrap(), Complex64::new(4.0, 0.0));
        let a = ComplexMatrix::diag_real(&[1.0, 2.0]);
        let b = ComplexMatrix::diag_real(&[3.0, 4.0]);
        assert_eq!(det_triangular_sum(&a, &b).unwrap(), Complex64::new(24.0, 0.0));
    }

    #[test]
    fn mixed_orientation_is_rejected() {
        let lower = ComplexMatrix::from_real(2, 2, &[1.0, 0.0, 1.0, 1.0]).unwrap();
        let upper = lower.transpose();
        assert_eq!(
            det_triangular_sum(&lower, &upper),
            Err(LinalgError::TriangularOrientation)
        );
        assert!(matches!(
            det_triangular_sum(&lower, &ComplexMatrix::identity(3)),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn determinant_and_inverse_of_small_matrix() {
        let a = ComplexMatrix::from_rows(&[
            vec![Complex64::new(0.0, 1.0), Complex64::new(2.0, 0.0)],
            vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, -1.0)],
        ])
        .unwrap();
        // i(1 - i) - 2 = -1 + i
        let d = determinant(&a).unwrap();
        assert!((d - Complex64::new(-1.0, 1.0)).norm() < 1e-14);
        let inv = inverse(&a).unwrap();
        assert!((&a * &inv).distance(&ComplexMatrix::identity(2)) < 1e-14);
    }

    #[test]
    fn singular_inverse_errors() {
        let a = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 4.0]).unwrap();
        assert_eq!(inverse(&a), Err(LinalgError::Singular));
        assert_eq!(determinant(&a).unwrap().norm(), 0.0);
    }
}
