use crate::linalg::hermitian_eigen;
use crate::model::{BeamformerState, ChannelRealization};

use super::precoder::link_phi;
use super::OptimizerError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceInfo {
    /// Real factors applied to `V₁` and `V₂` (at most 1).
    pub scale1: f64,
    pub scale2: f64,
    /// `tr(V₁V₁ᴴ) / tr(V₂V₂ᴴ)` after balancing.
    pub power_ratio: f64,
}

/// `c² ↦ tr[I + c² VᴴΦV]⁻¹` through the eigenvalues of `VᴴΦV`.
fn trace_curve(nu: &[f64]) -> impl Fn(f64) -> f64 + '_ {
    move |s: f64| nu.iter().map(|&x| 1.0 / (1.0 + s * x.max(0.0))).sum()
}

/// Largest `s ∈ [0, 1]` (up to round-off) with `curve(s) ≥ target`, returned on
/// the side where `curve(s) ≤ target`.
fn match_trace(curve: impl Fn(f64) -> f64, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    if curve(hi) >= target {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if curve(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Scales down the stronger link's transmitter so that `tr MSE₁ = tr MSE₂`.
///
/// `MSE₁` depends only on `V₂` and `MSE₂` only on `V₁` (relay filters fixed),
/// so one scalar search suffices. Nothing changes when the traces already agree
/// within `tol` relative.
pub fn balance_mse(
    ch: &ChannelRealization,
    state: &BeamformerState,
    tol: f64,
) -> Result<(BeamformerState, BalanceInfo), OptimizerError> {
    let nu = |which: usize| -> Result<Vec<f64>, OptimizerError> {
        let phi = link_phi(ch, state, which)?;
        let v = state.precoder(which);
        Ok(hermitian_eigen(&(&(&v.adjoint() * &phi) * v).hermitian_part())?.values)
    };
    // Link 1 decodes s₂ (depends on V₂); link 2 decodes s₁ (depends on V₁).
    let nu1 = nu(1)?;
    let nu2 = nu(0)?;
    let tr1 = trace_curve(&nu1)(1.0);
    let tr2 = trace_curve(&nu2)(1.0);
    let (mut c1, mut c2) = (1.0, 1.0);
    if (tr1 - tr2).abs() > tol * tr1.max(tr2) {
        if tr1 < tr2 {
            c2 = match_trace(trace_curve(&nu1), tr2).sqrt();
        } else {
            c1 = match_trace(trace_curve(&nu2), tr1).sqrt();
        }
    }
    let mut out = state.clone();
    if c1 != 1.0 || c2 != 1.0 {
        out.scale_precoders(c1, c2);
    }
    let p = out.source_powers();
    Ok((
        out,
        BalanceInfo {
            scale1: c1,
            scale2: c2,
            power_ratio: p[0] / p[1],
        },
    ))
}
