use crate::linalg::{inverse, solve, ComplexMatrix, LinalgError};
use crate::model::{equivalent_channel, noise_covariance, BeamformerState, ChannelRealization, Destination};

use super::OptimizerError;

/// Wiener receiver `W° = (H̃H̃ᴴ + C)⁻¹H̃`.
pub fn wiener_receiver(h_eq: &ComplexMatrix, c_noise: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let gram = h_eq * &h_eq.adjoint();
    solve(&(&gram + c_noise), h_eq)
}

/// `(WᴴH̃ − I)(WᴴH̃ − I)ᴴ + WᴴCW`.
pub fn mse_matrix(w: &ComplexMatrix, h_eq: &ComplexMatrix, c_noise: &ComplexMatrix) -> ComplexMatrix {
    let wh = w.adjoint();
    let e = (&wh * h_eq).add_diagonal(-1.0);
    let mse = &(&e * &e.adjoint()) + &(&(&wh * c_noise) * w);
    mse.hermitian_part()
}

/// `[I + H̃ᴴC⁻¹H̃]⁻¹`, the MSE at the Wiener receiver.
pub fn mse_closed_form(h_eq: &ComplexMatrix, c_noise: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let cih = solve(c_noise, h_eq)?;
    let info = (&h_eq.adjoint() * &cih).hermitian_part().add_diagonal(1.0);
    Ok(inverse(&info)?.hermitian_part())
}

/// Both links' MSE matrices under Wiener receivers.
#[derive(Debug, Clone)]
pub struct MseReport {
    pub mse1: ComplexMatrix,
    pub mse2: ComplexMatrix,
    pub tr1: f64,
    pub tr2: f64,
    pub sum: f64,
    pub iteration: usize,
}

impl MseReport {
    /// The balanced objective `max(tr MSE₁, tr MSE₂)`.
    pub fn worst(&self) -> f64 {
        self.tr1.max(self.tr2)
    }
}

/// Wiener receiver and MSE matrix for one destination.
pub fn link_mse(
    ch: &ChannelRealization,
    state: &BeamformerState,
    dest: Destination,
) -> Result<(ComplexMatrix, ComplexMatrix), OptimizerError> {
    let h = equivalent_channel(ch, state, dest)?;
    let c = noise_covariance(ch, state, dest)?;
    let w = wiener_receiver(&h, &c)?;
    Ok((w.clone(), mse_matrix(&w, &h, &c)))
}

/// Sets `w1`, `w2` to the Wiener receivers and reports both MSEs.
pub fn update_receivers(
    ch: &ChannelRealization,
    state: &mut BeamformerState,
    iteration: usize,
) -> Result<MseReport, OptimizerError> {
    let (w1, mse1) = link_mse(ch, state, Destination::One)?;
    let (w2, mse2) = link_mse(ch, state, Destination::Two)?;
    state.w1 = w1;
    state.w2 = w2;
    let tr1 = mse1.trace().re;
    let tr2 = mse2.trace().re;
    Ok(MseReport {
        mse1,
        mse2,
        tr1,
        tr2,
        sum: tr1 + tr2,
        iteration,
    })
}
