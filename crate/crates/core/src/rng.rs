//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, trial, purpose, attempt)`, so a trial's
//! numbers never depend on which worker ran it or in what order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::ComplexMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Channel = 0,
    Symbols = 1,
    Noise = 2,
    Oracle = 3,
}

pub fn stream_rng(seed: u64, trial: u64, purpose: Purpose, attempt: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stream = (trial << 24) | ((purpose as u64) << 16) | u64::from(attempt & 0xffff);
    rng.set_stream(stream);
    rng
}

/// One CN(0, 1) sample: real and imaginary parts each with variance ½.
#[inline]
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn complex_normal_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = complex_normal(rng);
        }
    }
    m
}
