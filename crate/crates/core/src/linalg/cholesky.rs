use num_complex::Complex64;

use super::{require_hermitian, require_square, ComplexMatrix, LinalgError, CHOLESKY_PIVOT_TOL};

/// Lower-triangular factor `xi` with `xiᴴ·xi = c` and a real positive diagonal.
///
/// Note the orientation: this is the "upper-lower" form `c = ΞᴴΞ`, not the
/// textbook `c = LLᴴ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    pub xi: ComplexMatrix,
}

impl CholeskyFactor {
    /// Diagonal entries of `xi⁻¹`, i.e. `1 / xi[k][k]`.
    pub fn inverse_diagonal(&self) -> Vec<f64> {
        (0..self.xi.rows()).map(|k| 1.0 / self.xi[(k, k)].re).collect()
    }

    /// `ln det c = 2 Σ ln xi[k][k]`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.xi.rows()).map(|k| self.xi[(k, k)].re.ln()).sum::<f64>()
    }
}

/// Factors a Hermitian positive-definite matrix as `c = ΞᴴΞ`, Ξ lower triangular.
///
/// Runs the standard `LLᴴ` recursion on the index-reversed matrix `JcJ` and maps
/// the factor back with `Ξ = J·Lᴴ·J`. A pivot at or below `1e-12` times the
/// largest diagonal entry is reported as not positive definite.
pub fn cholesky(c: &ComplexMatrix) -> Result<CholeskyFactor, LinalgError> {
    let n = require_square("cholesky", c)?;
    if !c.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    require_hermitian("cholesky", c, 1e-10)?;

    let scale = (0..n).map(|i| c[(i, i)].re.abs()).fold(0.0, f64::max);
    let floor = CHOLESKY_PIVOT_TOL * scale.max(f64::MIN_POSITIVE);
    let rev = |i: usize| n - 1 - i;

    // l is the standard lower factor of J c J.
    let mut l = ComplexMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = c[(rev(j), rev(j))].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if d.is_nan() || d <= floor {
            return Err(LinalgError::NotPositiveDefinite {
                index: rev(j),
                pivot: d,
            });
        }
        let djj = d.sqrt();
        l[(j, j)] = Complex64::new(djj, 0.0);
        for i in j + 1..n {
            let mut s = c[(rev(i), rev(j))];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }

    let xi = ComplexMatrix::from_fn(n, n, |i, j| l[(rev(j), rev(i))].conj());
    Ok(CholeskyFactor { xi })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_factor() {
        let f = cholesky(&ComplexMatrix::identity(3)).unwrap();
        assert!(f.xi.distance(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn diagonal_factor() {
        let c = ComplexMatrix::diag_real(&[4.0, 9.0]);
        let f = cholesky(&c).unwrap();
        assert!(f.xi.distance(&ComplexMatrix::diag_real(&[2.0, 3.0])) < 1e-15);
        assert_eq!(f.inverse_diagonal(), vec![0.5, 1.0 / 3.0]);
    }

    #[test]
    fn full_hermitian_factor_is_lower_and_reconstructs() {
        let c = ComplexMatrix::from_rows(&[
            vec![Complex64::new(4.0, 0.0), Complex64::new(1.0, 2.0)],
            vec![Complex64::new(1.0, -2.0), Complex64::new(6.0, 0.0)],
        ])
        .unwrap();
        let f = cholesky(&c).unwrap();
        assert!(f.xi.is_lower_triangular(0.0));
        assert!((&f.xi.adjoint() * &f.xi).distance(&c) < 1e-13);
    }

    #[test]
    fn indefinite_is_rejected() {
        let c = ComplexMatrix::from_real(2, 2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(cholesky(&c), Err(LinalgError::NotPositiveDefinite { .. })));
    }

    #[test]
    fn non_hermitian_is_rejected() {
        let c = ComplexMatrix::from_real(2, 2, &[1.0, 0.5, 0.0, 1.0]).unwrap();
        assert!(matches!(cholesky(&c), Err(LinalgError::NotHermitian { .. })));
    }
}
