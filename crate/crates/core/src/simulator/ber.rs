use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;

use crate::model::{BeamformerState, ChannelRealization, LinkSimulator, ModelError, NoiseDraws};

/// Gray-mapped QPSK with unit energy: bit 0 of the pair picks the sign of the
/// real part, bit 1 the imaginary part, `0 ↦ +`.
pub fn qpsk_map(b0: bool, b1: bool) -> Complex64 {
    let s = |b: bool| if b { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(s(b0), s(b1))
}

/// Minimum-distance decision for [`qpsk_map`].
pub fn qpsk_slice(z: Complex64) -> (bool, bool) {
    (z.re < 0.0, z.im < 0.0)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BitCount {
    pub errors: u64,
    pub bits: u64,
}

impl BitCount {
    pub fn rate(&self) -> f64 {
        if self.bits == 0 {
            0.0
        } else {
            self.errors as f64 / self.bits as f64
        }
    }
}

/// Sends `uses` QPSK vectors each way and counts bit errors after `ŝ = Wᴴỹ`.
/// All randomness comes from `symbols` and `noise`, so two states driven by
/// identically seeded generators see the same bits and the same noise.
pub fn count_bit_errors<R1: Rng + ?Sized, R2: Rng + ?Sized>(
    ch: &ChannelRealization,
    state: &BeamformerState,
    uses: usize,
    symbols: &mut R1,
    noise: &mut R2,
) -> Result<BitCount, ModelError> {
    let (n, m) = ch.shape();
    let mut sim = LinkSimulator::new(ch, state)?;
    let w_adj = [state.w1.adjoint(), state.w2.adjoint()];
    let zero = Complex64::new(0.0, 0.0);
    let mut bits = [vec![(false, false); m], vec![(false, false); m]];
    let mut s = [vec![zero; m], vec![zero; m]];
    let mut y = [vec![zero; m], vec![zero; m]];
    let mut est = vec![zero; m];
    let mut draws = NoiseDraws::zeros(m, n);
    let mut count = BitCount::default();
    for _ in 0..uses {
        for j in 0..2 {
            for k in 0..m {
                let b = (symbols.random::<bool>(), symbols.random::<bool>());
                bits[j][k] = b;
                s[j][k] = qpsk_map(b.0, b.1);
            }
        }
        draws.resample(noise, state.sigma2);
        let [y1, y2] = &mut y;
        sim.transmit(&s[0], &s[1], &draws, y1, y2);
        // Destination 1 recovers source 2 and vice versa.
        for (dest, src) in [(0usize, 1usize), (1, 0)] {
            w_adj[dest].mul_vec_into(&y[dest], &mut est);
            for k in 0..m {
                let (d0, d1) = qpsk_slice(est[k]);
                let (b0, b1) = bits[src][k];
                count.errors += u64::from(d0 != b0) + u64::from(d1 != b1);
            }
        }
        count.bits += 4 * m as u64;
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gray_map_round_trip() {
        for b0 in [false, true] {
            for b1 in [false, true] {
                let z = qpsk_map(b0, b1);
                assert!((z.norm_sqr() - 1.0).abs() < 1e-15);
                assert_eq!(qpsk_slice(z), (b0, b1));
            }
        }
        // Neighbors differ in one bit.
        let d = |a: (bool, bool), b: (bool, bool)| u8::from(a.0 != b.0) + u8::from(a.1 != b.1);
        let ring = [(false, false), (false, true), (true, true), (true, false)];
        for i in 0..4 {
            let (a, b) = (qpsk_map(ring[i].0, ring[i].1), qpsk_map(ring[(i + 1) % 4].0, ring[(i + 1) % 4].1));
            assert!(((a - b).norm() - 2f64.sqrt()).abs() < 1e-12);
            assert_eq!(d(ring[i], ring[(i + 1) % 4]), 1);
        }
    }
}
