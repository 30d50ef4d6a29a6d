use num_complex::Complex64;

use super::{unit_phase, ComplexMatrix, LinalgError};

/// Thin QR: `a = q·r` with `q` (N×M) having orthonormal columns and `r` (M×M)
/// upper triangular with a real nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct QRFactorization {
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
}

/// QL: `a = q·l` with `q` (N×N) unitary and `l` (N×M) lower triangular.
///
/// For N > M the triangle sits in the bottom M rows of `l` and the top N−M rows
/// are zero. The diagonal of that bottom block, `l[N−M+k][k]`, is real and
/// nonnegative.
#[derive(Debug, Clone)]
pub struct QLFactorization {
    pub q: ComplexMatrix,
    pub l: ComplexMatrix,
}

impl QLFactorization {
    /// Bottom M×M lower-triangular block of `l`.
    pub fn l_block(&self) -> ComplexMatrix {
        let (n, m) = self.l.shape();
        self.l.block(n - m, 0, m, m)
    }

    /// Diagonal of the bottom block, as reals.
    pub fn l_diagonal(&self) -> Vec<f64> {
        let (n, m) = self.l.shape();
        (0..m).map(|k| self.l[(n - m + k, k)].re).collect()
    }
}

impl QRFactorization {
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.r.rows()).map(|k| self.r[(k, k)].re).collect()
    }
}

/// Full Householder QR of an N×M matrix with N ≥ M.
///
/// Returns `(q, r)` with `q` N×N unitary and `r` N×M upper trapezoidal; the first
/// M diagonal entries of `r` are real and nonnegative.
pub fn qr_full(a: &ComplexMatrix) -> Result<(ComplexMatrix, ComplexMatrix), LinalgError> {
    let (n, m) = a.shape();
    if n < m {
        return Err(LinalgError::TooFewRows {
            op: "qr",
            rows: n,
            cols: m,
        });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut r = a.clone();
    let mut q = ComplexMatrix::identity(n);
    let mut v = vec![Complex64::new(0.0, 0.0); n];

    for k in 0..m.min(n - 1) {
        let norm = (k..n).map(|i| r[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = -unit_phase(r[(k, k)]) * norm;
        for i in k..n {
            v[i] = r[(i, k)];
        }
        v[k] -= alpha;
        let vv: f64 = (k..n).map(|i| v[i].norm_sqr()).sum();
        if vv == 0.0 {
            continue;
        }
        let beta = 2.0 / vv;

        for j in k..m {
            let s: Complex64 = (k..n).map(|i| v[i].conj() * r[(i, j)]).sum();
            let s = s * beta;
            for i in k..n {
                let d = v[i] * s;
                r[(i, j)] -= d;
            }
        }
        r[(k, k)] = alpha;
        for i in k + 1..n {
            r[(i, k)] = Complex64::new(0.0, 0.0);
        }

        for i in 0..n {
            let s: Complex64 = (k..n).map(|j| q[(i, j)] * v[j]).sum();
            let s = s * beta;
            for j in k..n {
                let d = s * v[j].conj();
                q[(i, j)] -= d;
            }
        }
    }

    for k in 0..m {
        let d = unit_phase(r[(k, k)]);
        if d != Complex64::new(1.0, 0.0) {
            let dc = d.conj();
            for j in k..m {
                r[(k, j)] *= dc;
            }
            for i in 0..n {
                q[(i, k)] *= d;
            }
        }
        r[(k, k)] = Complex64::new(r[(k, k)].re.max(0.0), 0.0);
    }
    Ok((q, r))
}

/// Thin QR decomposition `a = q·r`, N ≥ M.
pub fn qr_decompose(a: &ComplexMatrix) -> Result<QRFactorization, LinalgError> {
    let (n, m) = a.shape();
    let (q, r) = qr_full(a)?;
    Ok(QRFactorization {
        q: q.block(0, 0, n, m),
        r: r.block(0, 0, m, m),
    })
}

/// QL decomposition `a = q·l`, N ≥ M, computed as a QR of the column-reversed input.
pub fn ql_decompose(a: &ComplexMatrix) -> Result<QLFactorization, LinalgError> {
    let (n, m) = a.shape();
    if n < m {
        return Err(LinalgError::TooFewRows {
            op: "ql",
            rows: n,
            cols: m,
        });
    }
    let (q, r) = qr_full(&a.reverse_cols())?;
    Ok(QLFactorization {
        q: q.reverse_cols(),
        l: r.reverse_rows().reverse_cols(),
    })
}

/// Extends an N×M matrix with orthonormal columns to an N×N unitary whose first
/// M columns are exactly `u`.
pub fn complete_unitary(u: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let (n, m) = u.shape();
    let (mut q, _) = qr_full(u)?;
    for j in 0..m {
        for i in 0..n {
            q[(i, j)] = u[(i, j)];
        }
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn qr_of_identity_is_trivial() {
        let f = qr_decompose(&ComplexMatrix::identity(2)).unwrap();
        assert!(f.q.distance(&ComplexMatrix::identity(2)) < 1e-15);
        assert!(f.r.distance(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn qr_of_three_four_vector() {
        let a = ComplexMatrix::from_real(2, 1, &[3.0, 4.0]).unwrap();
        let f = qr_decompose(&a).unwrap();
        assert!((f.r[(0, 0)] - c(5.0, 0.0)).norm() < 1e-14);
        assert!((f.q[(0, 0)] - c(0.6, 0.0)).norm() < 1e-14);
        assert!((f.q[(1, 0)] - c(0.8, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn ql_of_identity_is_trivial() {
        let f = ql_decompose(&ComplexMatrix::identity(2)).unwrap();
        assert!(f.q.distance(&ComplexMatrix::identity(2)) < 1e-15);
        assert!(f.l.distance(&ComplexMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn ql_of_exchange_matrix() {
        // Hand Householder on the reversed input [[1,0],[0,1]] gives q = J, l = I.
        let a = ComplexMatrix::from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
        let f = ql_decompose(&a).unwrap();
        assert!(f.l.is_lower_triangular(1e-15));
        assert!((&f.q * &f.l).distance(&a) < 1e-14);
        assert!(f.l.distance(&ComplexMatrix::identity(2)) < 1e-14);
        assert!((super::super::determinant(&f.l).unwrap().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rectangular_ql_puts_triangle_at_bottom() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(1.0, 0.5), c(0.2, -1.0)],
            vec![c(-0.3, 0.1), c(0.7, 0.7)],
            vec![c(2.0, 0.0), c(0.0, 1.0)],
            vec![c(0.4, -0.4), c(-1.1, 0.3)],
        ])
        .unwrap();
        let f = ql_decompose(&a).unwrap();
        assert!((&f.q * &f.l).distance(&a) < 1e-13);
        assert!(f.q.orthonormality_defect() < 1e-13);
        for i in 0..2 {
            for j in 0..2 {
                assert!(f.l[(i, j)].norm() < 1e-14, "top rows must vanish");
            }
        }
        assert!(f.l_block().is_lower_triangular(1e-14));
        assert!(f.l_diagonal().iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn wide_input_is_rejected() {
        let a = ComplexMatrix::zeros(2, 3);
        assert!(matches!(ql_decompose(&a), Err(LinalgError::TooFewRows { .. })));
        assert!(matches!(qr_decompose(&a), Err(LinalgError::TooFewRows { .. })));
    }

    #[test]
    fn completion_keeps_given_columns() {
        let a = ComplexMatrix::from_rows(&[
            vec![c(1.0, 1.0)],
            vec![c(0.0, 2.0)],
            vec![c(-1.0, 0.0)],
        ])
        .unwrap();
        let q = qr_decompose(&a).unwrap().q;
        let full = complete_unitary(&q).unwrap();
        assert!(full.orthonormality_defect() < 1e-13);
        assert!(full.block(0, 0, 3, 1).distance(&q) == 0.0);
    }
}
