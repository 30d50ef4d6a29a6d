//! Dense complex linear algebra for small matrices (dimension up to about 16).
//!
//! Every kernel is a pure function of its inputs. The triangular factorizations
//! share one Householder QR kernel; QL is obtained from it by index reversal.
//! Diagonals of `R`, `L` and Cholesky factors are real and nonnegative, with the
//! unit-modulus phases absorbed into the unitary factor.

mod cholesky;
mod eigen;
mod householder;
mod lu;
mod matrix;
mod svd;

pub use cholesky::{cholesky, CholeskyFactor};
pub use eigen::{hermitian_eigen, hermitian_inv_sqrt, hermitian_sqrt, HermitianEigen};
pub use householder::{complete_unitary, ql_decompose, qr_decompose, qr_full, QLFactorization, QRFactorization};
pub use lu::{det_triangular_sum, determinant, inverse, log_det_hpd, solve};
pub use matrix::ComplexMatrix;
pub use num_complex::Complex64;
pub use svd::{svd, Svd};

use thiserror::Error;

/// Pivot threshold below which a Cholesky factorization is rejected.
pub const CHOLESKY_PIVOT_TOL: f64 = 1e-12;
/// Eigenvalues below `-SQRT_REJECT_TOL` make `hermitian_sqrt` fail.
pub const SQRT_REJECT_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("invalid shape {rows}x{cols} for {len} entries")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("{op}: need rows >= cols, got {rows}x{cols}")]
    TooFewRows {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: matrix must be square, got {rows}x{cols}")]
    NotSquare {
        op: &'static str,
        rows: usize,
        cols: usize,
    },
    #[error("{op}: matrix is not Hermitian (defect {defect:e})")]
    NotHermitian { op: &'static str, defect: f64 },
    #[error("matrix is not positive definite (pivot {pivot:e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix has eigenvalue {value:e} below the admissible floor")]
    NegativeEigenvalue { value: f64 },
    #[error("matrix is singular to working precision")]
    Singular,
    #[error("operands must be both lower or both upper triangular")]
    TriangularOrientation,
}

fn require_square(op: &'static str, a: &ComplexMatrix) -> Result<usize, LinalgError> {
    if a.is_square() {
        Ok(a.rows())
    } else {
        Err(LinalgError::NotSquare {
            op,
            rows: a.rows(),
            cols: a.cols(),
        })
    }
}

/// Hermitian check relative to the matrix scale.
fn require_hermitian(op: &'static str, a: &ComplexMatrix, tol: f64) -> Result<(), LinalgError> {
    let defect = a.hermitian_defect();
    if defect > tol * a.max_abs().max(1.0) {
        Err(LinalgError::NotHermitian { op, defect })
    } else {
        Ok(())
    }
}

/// Unit-modulus phase of `z`, or 1 when `z` is zero.
#[inline]
pub(crate) fn unit_phase(z: Complex64) -> Complex64 {
    let r = z.norm();
    if r > 0.0 {
        z / r
    } else {
        Complex64::new(1.0, 0.0)
    }
}
