use num_complex::Complex64;

use super::eigen::{jacobi_rotation, rotate_columns};
use super::{ComplexMatrix, LinalgError};

const MAX_SWEEPS: usize = 80;

/// Thin SVD `a = u·diag(sigma)·v_adjoint` with `k = min(rows, cols)` singular
/// values in nonincreasing order. For square inputs `u` and `v_adjoint` are unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: ComplexMatrix,
    pub sigma: Vec<f64>,
    pub v_adjoint: ComplexMatrix,
}

impl Svd {
    pub fn reconstruct(&self) -> ComplexMatrix {
        let (m, k) = self.u.shape();
        let n = self.v_adjoint.cols();
        ComplexMatrix::from_fn(m, n, |i, j| {
            (0..k)
                .map(|l| self.u[(i, l)] * self.sigma[l] * self.v_adjoint[(l, j)])
                .sum()
        })
    }
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn svd(a: &ComplexMatrix) -> Result<Svd, LinalgError> {
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.rows() < a.cols() {
        let t = tall_svd(&a.adjoint());
        return Ok(Svd {
            u: t.v_adjoint.adjoint(),
            sigma: t.sigma,
            v_adjoint: t.u.adjoint(),
        });
    }
    Ok(tall_svd(a))
}

fn tall_svd(a: &ComplexMatrix) -> Svd {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(n);

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = Complex64::new(0.0, 0.0);
                for i in 0..m {
                    let xp = w[(i, p)];
                    let xq = w[(i, q)];
                    alpha += xp.norm_sqr();
                    beta += xq.norm_sqr();
                    gamma += xp.conj() * xq;
                }
                if gamma.norm() <= 1e-15 * (alpha * beta).sqrt() || gamma.norm() == 0.0 {
                    continue;
                }
                rotated = true;
                let (c, s, ph) = jacobi_rotation(alpha, beta, gamma);
                rotate_columns(&mut w, p, q, c, s, ph);
                rotate_columns(&mut v, p, q, c, s, ph);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let top = norms[order[0]];
    let tiny = f64::EPSILON * top.max(f64::MIN_POSITIVE) * (m.max(n) as f64);

    let mut u = ComplexMatrix::zeros(m, n);
    let mut sigma = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (dst, &src) in order.iter().enumerate() {
        let s = norms[src];
        if s > tiny {
            for i in 0..m {
                u[(i, dst)] = w[(i, src)] / s;
            }
            sigma.push(s);
        } else {
            sigma.push(0.0);
            missing.push(dst);
        }
    }
    fill_orthonormal(&mut u, &missing);
    let v_sorted = ComplexMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Svd {
        u,
        sigma,
        v_adjoint: v_sorted.adjoint(),
    }
}

/// Fills the listed columns of `u` with unit vectors orthogonal to all others.
fn fill_orthonormal(u: &mut ComplexMatrix, missing: &[usize]) {
    let (m, n) = u.shape();
    let mut filled: Vec<usize> = (0..n).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0;
    for &col in missing {
        while candidate < m {
            let mut x = vec![Complex64::new(0.0, 0.0); m];
            x[candidate] = Complex64::new(1.0, 0.0);
            candidate += 1;
            for _ in 0..2 {
                for &j in &filled {
                    let proj: Complex64 = (0..m).map(|i| u[(i, j)].conj() * x[i]).sum();
                    for (i, xi) in x.iter_mut().enumerate() {
                        *xi -= u[(i, j)] * proj;
                    }
                }
            }
            let norm = x.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
            if norm > 1e-8 {
                for (i, xi) in x.iter().enumerate() {
                    u[(i, col)] = xi / norm;
                }
                filled.push(col);
                break;
            }
        }
    }
}
