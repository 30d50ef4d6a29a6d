use num_complex::Complex64;
use rand::Rng;

use super::{BeamformerState, ChannelRealization, Destination, ModelError};
use crate::linalg::ComplexMatrix;
use crate::rng::complex_normal;

fn check_state(ch: &ChannelRealization, state: &BeamformerState) -> Result<(usize, usize), ModelError> {
    let (n, m) = ch.shape();
    let ok = state.v1.shape() == (m, m)
        && state.v2.shape() == (m, m)
        && state.filters.iter().all(|f| f.composed().shape() == (n, n));
    if !ok {
        return Err(ModelError::Dimension(format!(
            "state does not match {n}x{m} channels"
        )));
    }
    Ok((n, m))
}

/// Raw equivalent channel `ρ Σᵢ H_{i,r}ᵀ Fᵢ H_{i,t} V_t` seen at the destination.
pub fn equivalent_channel(
    ch: &ChannelRealization,
    state: &BeamformerState,
    dest: Destination,
) -> Result<ComplexMatrix, ModelError> {
    let (_, m) = check_state(ch, state)?;
    let (r, t) = (dest.receiver(), dest.transmitter());
    let mut g = ComplexMatrix::zeros(m, m);
    for i in 0..2 {
        let hf = &ch.h(i, r).transpose() * state.filters[i].composed();
        g = &g + &(&hf * ch.h(i, t));
    }
    Ok((&g * state.precoder(t)).scale(state.rho_r))
}

/// Raw noise covariance `σ²(ρ² Σᵢ H_{i,r}ᵀ Fᵢ Fᵢᴴ H_{i,r}* + I)`.
pub fn noise_covariance(
    ch: &ChannelRealization,
    state: &BeamformerState,
    dest: Destination,
) -> Result<ComplexMatrix, ModelError> {
    let (_, m) = check_state(ch, state)?;
    let r = dest.receiver();
    let mut c = ComplexMatrix::zeros(m, m);
    for i in 0..2 {
        let hf = &ch.h(i, r).transpose() * state.filters[i].composed();
        c = &c + &(&hf * &hf.adjoint());
    }
    let rho2 = state.rho_r * state.rho_r;
    Ok(c.scale(rho2).add_diagonal(1.0).scale(state.sigma2))
}

/// Noise samples for one channel use: `relay[i]` has length N, `dest[j]` length M.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraws {
    pub relay: [Vec<Complex64>; 2],
    pub dest: [Vec<Complex64>; 2],
}

impl NoiseDraws {
    pub fn zeros(m: usize, n: usize) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            relay: [vec![z; n], vec![z; n]],
            dest: [vec![z; m], vec![z; m]],
        }
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, sigma2: f64) -> Self {
        let mut d = Self::zeros(m, n);
        d.resample(rng, sigma2);
        d
    }

    /// Overwrites every sample in place with fresh CN(0, σ²) draws.
    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R, sigma2: f64) {
        let s = sigma2.sqrt();
        for v in self.relay.iter_mut().chain(self.dest.iter_mut()) {
            for x in v.iter_mut() {
                *x = complex_normal(rng) * s;
            }
        }
    }
}

/// Full two-slot chain with self-interference cancellation.
///
/// Returns `(ỹ₁, ỹ₂)`: the signals at sources 1 and 2 after each has
/// subtracted the echo of its own transmission.
pub fn simulate_transmission(
    ch: &ChannelRealization,
    state: &BeamformerState,
    s1: &[Complex64],
    s2: &[Complex64],
    noise: &NoiseDraws,
) -> Result<(Vec<Complex64>, Vec<Complex64>), ModelError> {
    let (n, m) = check_state(ch, state)?;
    if s1.len() != m
        || s2.len() != m
        || noise.relay.iter().any(|v| v.len() != n)
        || noise.dest.iter().any(|v| v.len() != m)
    {
        return Err(ModelError::Dimension(format!(
            "symbols/noise do not match m={m}, n={n}"
        )));
    }
    let mut sim = LinkSimulator::new(ch, state)?;
    let mut y1 = vec![Complex64::new(0.0, 0.0); m];
    let mut y2 = vec![Complex64::new(0.0, 0.0); m];
    sim.transmit(s1, s2, noise, &mut y1, &mut y2);
    Ok((y1, y2))
}

/// Precomputed, allocation-free form of [`simulate_transmission`] for long
/// symbol runs over one realization.
#[derive(Debug, Clone)]
pub struct LinkSimulator {
    /// `H_{i,j} V_j`
    forward: [[ComplexMatrix; 2]; 2],
    /// `ρ F_i`
    amplify: [ComplexMatrix; 2],
    /// `H_{i,j}ᵀ`
    back: [[ComplexMatrix; 2]; 2],
    /// `ρ Σᵢ H_{i,j}ᵀ Fᵢ H_{i,j} V_j`
    echo: [ComplexMatrix; 2],
    y_relay: Vec<Complex64>,
    x_relay: Vec<Complex64>,
    tmp_n: Vec<Complex64>,
    tmp_m: Vec<Complex64>,
}

impl LinkSimulator {
    pub fn new(ch: &ChannelRealization, state: &BeamformerState) -> Result<Self, ModelError> {
        let (n, m) = check_state(ch, state)?;
        let forward = [0, 1].map(|i| [0, 1].map(|j| ch.h(i, j) * state.precoder(j)));
        let amplify = [0, 1].map(|i| state.filters[i].composed().scale(state.rho_r));
        let back = [0, 1].map(|i| [0, 1].map(|j| ch.h(i, j).transpose()));
        let echo = [0, 1].map(|j| {
            let mut e = ComplexMatrix::zeros(m, m);
            for i in 0..2 {
                e = &e + &(&(&back[i][j] * &amplify[i]) * &forward[i][j]);
            }
            e
        });
        let z = Complex64::new(0.0, 0.0);
        Ok(Self {
            forward,
            amplify,
            back,
            echo,
            y_relay: vec![z; n],
            x_relay: vec![z; n],
            tmp_n: vec![z; n],
            tmp_m: vec![z; m],
        })
    }

    pub fn transmit(
        &mut self,
        s1: &[Complex64],
        s2: &[Complex64],
        noise: &NoiseDraws,
        out1: &mut [Complex64],
        out2: &mut [Complex64],
    ) {
        out1.copy_from_slice(&noise.dest[0]);
        out2.copy_from_slice(&noise.dest[1]);
        for i in 0..2 {
            // Slot 1: relay i hears both sources.
            self.forward[i][0].mul_vec_into(s1, &mut self.y_relay);
            self.forward[i][1].mul_vec_into(s2, &mut self.tmp_n);
            for ((y, t), w) in self.y_relay.iter_mut().zip(&self.tmp_n).zip(&noise.relay[i]) {
                *y += t + w;
            }
            // Slot 2: amplify and broadcast back.
            self.amplify[i].mul_vec_into(&self.y_relay, &mut self.x_relay);
            self.back[i][0].mul_vec_into(&self.x_relay, &mut self.tmp_m);
            out1.iter_mut().zip(&self.tmp_m).for_each(|(o, t)| *o += t);
            self.back[i][1].mul_vec_into(&self.x_relay, &mut self.tmp_m);
            out2.iter_mut().zip(&self.tmp_m).for_each(|(o, t)| *o += t);
        }
        self.echo[0].mul_vec_into(s1, &mut self.tmp_m);
        out1.iter_mut().zip(&self.tmp_m).for_each(|(o, t)| *o -= t);
        self.echo[1].mul_vec_into(s2, &mut self.tmp_m);
        out2.iter_mut().zip(&self.tmp_m).for_each(|(o, t)| *o -= t);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RelayFilter;

    fn scalar_state(f: f64, rho: f64, sigma2: f64) -> (ChannelRealization, BeamformerState) {
        let one = ComplexMatrix::identity(1);
        let ch = ChannelRealization::uniform(one.clone());
        let filt = RelayFilter::from_matrix(one.scale(f));
        let st = BeamformerState::new(one.clone(), one, [filt.clone(), filt], rho, sigma2);
        (ch, st)
    }

    #[test]
    fn scalar_unit_example() {
        let (ch, st) = scalar_state(1.0, 1.0, 1.0);
        let h = equivalent_channel(&ch, &st, Destination::One).unwrap();
        assert!((h[(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let c = noise_covariance(&ch, &st, Destination::One).unwrap();
        assert!((c[(0, 0)] - Complex64::new(3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_filters_leave_local_noise() {
        let (ch, st) = scalar_state(0.0, 1.0, 2.5);
        let c = noise_covariance(&ch, &st, Destination::Two).unwrap();
        assert!((c[(0, 0)].re - 2.5).abs() < 1e-15);
        let noise = NoiseDraws {
            relay: [vec![Complex64::new(3.0, 1.0)], vec![Complex64::new(-1.0, 0.5)]],
            dest: [vec![Complex64::new(0.25, 0.0)], vec![Complex64::new(0.0, -0.75)]],
        };
        let one = [Complex64::new(1.0, 0.0)];
        let (y1, y2) = simulate_transmission(&ch, &st, &one, &one, &noise).unwrap();
        assert_eq!(y1, noise.dest[0]);
        assert_eq!(y2, noise.dest[1]);
    }

    #[test]
    fn echo_is_cancelled() {
        let (ch, st) = scalar_state(0.7, 0.3, 1.0);
        let zero = [Complex64::new(0.0, 0.0)];
        let s = [Complex64::new(0.6, -0.8)];
        let (y1, _) = simulate_transmission(&ch, &st, &s, &zero, &NoiseDraws::zeros(1, 1)).unwrap();
        assert!(y1[0].norm() < 1e-15);
    }
}
