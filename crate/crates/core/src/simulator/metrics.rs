use std::f64::consts::LN_2;

use crate::linalg::{log_det_hpd, solve, svd, ComplexMatrix};
use crate::model::{equivalent_channel, noise_covariance, BeamformerState, ChannelRealization, Decomposition, Destination};
use crate::optimizer::{link_mse, mse_closed_form};

use super::SimError;

/// Sum mutual information of both links, in bits (non-positive).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmiReport {
    /// `log₂|MSE₁| + log₂|MSE₂|` from the Wiener MSE matrices.
    pub smi: f64,
    /// Same quantity as `−log₂|I + ĤᴴĈ⁻¹Ĥ|` per link, link 1 through the
    /// triangular factors when the state carries them.
    pub smi_dual: f64,
    /// High-SNR form `−log₂|ĤᴴĈ⁻¹Ĥ|` summed over links, i.e. `−log₂|B|²` each;
    /// `+∞` when a link carries no information.
    pub high_snr: f64,
}

fn log2_det_hpd(a: &ComplexMatrix) -> Result<f64, SimError> {
    log_det_hpd(&a.hermitian_part())
        .map(|v| v / LN_2)
        .map_err(|_| SimError::SingularMse)
}

/// `log₂|ĤᴴĈ⁻¹Ĥ|` for one link.
fn log2_det_information(h: &ComplexMatrix, c: &ComplexMatrix) -> Result<f64, SimError> {
    let cih = solve(c, h).map_err(|_| SimError::SingularMse)?;
    log2_det_hpd(&(&h.adjoint() * &cih))
}

pub fn smi_of_state(ch: &ChannelRealization, state: &BeamformerState) -> Result<SmiReport, SimError> {
    let mut smi = 0.0;
    let mut dual = 0.0;
    let mut high = 0.0;
    for dest in [Destination::One, Destination::Two] {
        let (_, mse) = link_mse(ch, state, dest)?;
        smi += log2_det_hpd(&mse)?;
        let triangular = match (&state.factors, dest) {
            (Some(f), Destination::One) => Some((f.channel(&state.gains(), state.rho_r), f.noise(&state.gains(), state.rho_r, state.sigma2))),
            _ => None,
        };
        let (h, c) = match triangular {
            Some(hc) => hc,
            None => (equivalent_channel(ch, state, dest)?, noise_covariance(ch, state, dest)?),
        };
        let closed = mse_closed_form(&h, &c).map_err(|_| SimError::SingularMse)?;
        dual += log2_det_hpd(&closed)?;
        high -= log2_det_information(&h, &c).unwrap_or(f64::NEG_INFINITY);
    }
    Ok(SmiReport {
        smi,
        smi_dual: dual,
        high_snr: high,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvdEquivalenceReport {
    /// `∏ₖ ςₖ²` from the triangular diagonals of `Ĥ₁`.
    pub triangular_product: f64,
    /// `det(Ĥ₁Ĥ₁ᴴ)` as the product of squared singular values.
    pub singular_product: f64,
    pub relative_error: f64,
    /// Squared singular values of `Ĥ₁` divided by their geometric mean.
    pub normalized_spectrum: Vec<f64>,
    pub passed: bool,
}

pub const SVD_EQUIVALENCE_TOL: f64 = 1e-8;

/// Checks `∏ ςₖ² = ∏ σₖ²(Ĥ₁)` for a QL-QR state. Products are compared in the
/// log domain so tiny determinants do not underflow.
pub fn svd_equivalence_check(state: &BeamformerState) -> Result<SvdEquivalenceReport, SimError> {
    let factors = state.factors.as_ref().ok_or(SimError::MissingFactors)?;
    if factors.decomposition != Decomposition::QlQr {
        return Err(SimError::MissingFactors);
    }
    let gains = state.gains();
    let sig = factors.diagonal_products(&gains, state.rho_r);
    let h = factors.channel(&gains, state.rho_r);
    let s = svd(&h)?;
    let log_tri: f64 = sig.iter().map(|x| 2.0 * x.abs().ln()).sum();
    let log_svd: f64 = s.sigma.iter().map(|x| 2.0 * x.ln()).sum();
    let relative_error = (log_tri - log_svd).exp_m1().abs();
    let geo = log_svd / s.sigma.len() as f64;
    Ok(SvdEquivalenceReport {
        triangular_product: log_tri.exp(),
        singular_product: log_svd.exp(),
        relative_error,
        normalized_spectrum: s.sigma.iter().map(|x| (2.0 * x.ln() - geo).exp()).collect(),
        passed: relative_error <= SVD_EQUIVALENCE_TOL,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RelayFilter;

    #[test]
    fn zero_filters_give_zero_smi() {
        let ch = ChannelRealization::uniform(ComplexMatrix::identity(2));
        let z = RelayFilter::zeros(2, 2);
        let st = BeamformerState::new(ComplexMatrix::identity(2), ComplexMatrix::identity(2), [z.clone(), z], 0.5, 1.0);
        let r = smi_of_state(&ch, &st).unwrap();
        assert!(r.smi.abs() < 1e-15);
        assert!(r.smi_dual.abs() < 1e-15);
    }

    #[test]
    fn scalar_quarter_mse() {
        // Channel 2f, noise σ²(2f² + 1); f² = 1.5 and σ² = ½ give SNR 3, MSE ¼.
        let ch = ChannelRealization::uniform(ComplexMatrix::identity(1));
        let f = RelayFilter::from_matrix(ComplexMatrix::identity(1).scale(1.5f64.sqrt()));
        let st = BeamformerState::new(ComplexMatrix::identity(1), ComplexMatrix::identity(1), [f.clone(), f], 1.0, 0.5);
        let r = smi_of_state(&ch, &st).unwrap();
        assert!((r.smi + 4.0).abs() < 1e-12);
        assert!((r.smi_dual + 4.0).abs() < 1e-12);
    }
}
