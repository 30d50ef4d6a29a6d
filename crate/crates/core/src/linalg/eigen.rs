use num_complex::Complex64;

use super::{require_hermitian, require_square, unit_phase, ComplexMatrix, LinalgError};
use super::SQRT_REJECT_TOL;

const MAX_SWEEPS: usize = 64;

/// Eigen-decomposition `a = V·diag(values)·Vᴴ` of a Hermitian matrix.
/// Eigenvalues are sorted in decreasing order.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

impl HermitianEigen {
    /// Rebuilds `V·diag(f(λ))·Vᴴ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let g: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * g[k] * v[(j, k)].conj()).sum()
        })
    }
}

/// Rotation in the (p, q) plane that annihilates the Hermitian pair `(a_pp, a_pq, a_qq)`.
///
/// Returns `(c, s, w)` describing the unitary
/// `G = [[c, s], [-s·w̄, c·w̄]]` with `w = a_pq / |a_pq|`.
#[inline]
pub(super) fn jacobi_rotation(app: f64, aqq: f64, apq: Complex64) -> (f64, f64, Complex64) {
    let mag = apq.norm();
    let w = unit_phase(apq);
    let tau = (aqq - app) / (2.0 * mag);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    (c, t * c, w)
}

/// Applies `G` from the right to columns p and q of `m`.
#[inline]
pub(super) fn rotate_columns(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, w: Complex64) {
    let wc = w.conj();
    for k in 0..m.rows() {
        let xp = m[(k, p)];
        let xq = m[(k, q)];
        m[(k, p)] = xp * c - xq * (wc * s);
        m[(k, q)] = xp * s + xq * (wc * c);
    }
}

/// Applies `Gᴴ` from the left to rows p and q of `m`.
#[inline]
fn rotate_rows(m: &mut ComplexMatrix, p: usize, q: usize, c: f64, s: f64, w: Complex64) {
    for k in 0..m.cols() {
        let xp = m[(p, k)];
        let xq = m[(q, k)];
        m[(p, k)] = xp * c - xq * (w * s);
        m[(q, k)] = xp * s + xq * (w * c);
    }
}

/// Cyclic complex Jacobi eigen-solver for Hermitian matrices.
pub fn hermitian_eigen(a: &ComplexMatrix) -> Result<HermitianEigen, LinalgError> {
    let n = require_square("hermitian_eigen", a)?;
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    require_hermitian("hermitian_eigen", a, 1e-10)?;
    let mut m = a.hermitian_part();
    let mut v = ComplexMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm_sqr())
            .sum();
        let diag: f64 = (0..n).map(|i| m[(i, i)].norm_sqr()).sum();
        if off <= 1e-30 * diag || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.norm() <= 1e-300 {
                    continue;
                }
                let (c, s, w) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, apq);
                rotate_columns(&mut m, p, q, c, s, w);
                rotate_rows(&mut m, p, q, c, s, w);
                m[(p, q)] = Complex64::new(0.0, 0.0);
                m[(q, p)] = Complex64::new(0.0, 0.0);
                m[(p, p)].im = 0.0;
                m[(q, q)].im = 0.0;
                rotate_columns(&mut v, p, q, c, s, w);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok(HermitianEigen { values, vectors })
}

/// Principal square root of a Hermitian positive-semidefinite matrix.
///
/// Eigenvalues in `[-1e-6, 0)` come from cancellation upstream and are clipped
/// to zero; anything lower is rejected.
pub fn hermitian_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let eig = hermitian_eigen(a)?;
    let lowest = eig.values.last().copied().unwrap_or(0.0);
    if lowest < -SQRT_REJECT_TOL {
        return Err(LinalgError::NegativeEigenvalue { value: lowest });
    }
    Ok(eig.reconstruct_with(|x| if x > 0.0 { x.sqrt() } else { 0.0 }))
}

/// Inverse principal square root of a Hermitian positive-definite matrix.
pub fn hermitian_inv_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let eig = hermitian_eigen(a)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let lowest = eig.values.last().copied().unwrap_or(0.0);
    if !(lowest > 1e-14 * top.abs()) || lowest <= 0.0 {
        return Err(LinalgError::Singular);
    }
    Ok(eig.reconstruct_with(|x| 1.0 / x.sqrt()))
}
