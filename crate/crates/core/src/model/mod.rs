//! Two-source, two-relay amplify-and-forward system model.
//!
//! Indexing is zero-based throughout: relay `i ∈ {0, 1}`, source `j ∈ {0, 1}`,
//! and `H_{i,j}` is the N×M channel from source `j` to relay `i`. Both time slots
//! use reciprocal channels, so relay `i` reaches source `j` through `H_{i,j}ᵀ`.

mod filters;
mod signal;

pub use filters::{
    assemble_filters, assemble_structured_filters, initial_gains, triangular_factors, projected_weights,
    relay_input_covariance, relay_power, Decomposition, TriangularFactors, RelayFactors, RelayFilter,
    RelayGains,
};
pub use signal::{
    equivalent_channel, noise_covariance, simulate_transmission, LinkSimulator, NoiseDraws,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{ComplexMatrix, LinalgError};
use crate::rng::{complex_normal_matrix, stream_rng, Purpose};

/// Triangular diagonals below this magnitude mark a degenerate draw.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("degenerate channel at relay {relay}: diagonal {value:e} at index {index}")]
    DegenerateChannel { relay: usize, index: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// How the relay power budget is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayPowerMode {
    /// `tr(F₁D₁F₁ᴴ) + tr(F₂D₂F₂ᴴ) ≤ P_R`
    #[default]
    Total,
    /// `tr(F₁D₁F₁ᴴ) ≤ a·P_R` and `tr(F₂D₂F₂ᴴ) ≤ (1−a)·P_R`
    PerRelay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub m: usize,
    pub n: usize,
    pub p1: f64,
    pub p2: f64,
    pub pr: f64,
    pub a: f64,
    pub sigma2: f64,
    pub seed: u64,
    #[serde(default)]
    pub relay_power: RelayPowerMode,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            m: 2,
            n: 2,
            p1: 10.0,
            p2: 10.0,
            pr: 10.0,
            a: 0.5,
            sigma2: 1.0,
            seed: 0,
            relay_power: RelayPowerMode::Total,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |msg: String| Err(ModelError::InvalidConfig(msg));
        if self.m < 1 || self.n < self.m {
            return bad(format!("need n >= m >= 1, got m={} n={}", self.m, self.n));
        }
        for (name, v) in [("p1", self.p1), ("p2", self.p2), ("pr", self.pr), ("sigma2", self.sigma2)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.a) {
            return bad(format!("a must lie in [0, 1], got {}", self.a));
        }
        Ok(())
    }

    pub fn rho_r(&self) -> f64 {
        1.0 / (self.p1 + self.p2).sqrt()
    }

    pub fn source_power(&self, source: usize) -> f64 {
        if source == 0 {
            self.p1
        } else {
            self.p2
        }
    }

    /// Per-relay budgets `[a·P_R, (1−a)·P_R]`.
    pub fn relay_budgets(&self) -> [f64; 2] {
        [self.a * self.pr, (1.0 - self.a) * self.pr]
    }
}

/// `ρ_R = 1/√(P₁+P₂)`.
pub fn power_normalizer(p1: f64, p2: f64) -> Result<f64, ModelError> {
    if !(p1 > 0.0 && p2 > 0.0 && p1.is_finite() && p2.is_finite()) {
        return Err(ModelError::InvalidConfig(format!(
            "source powers must be positive, got {p1} and {p2}"
        )));
    }
    Ok(1.0 / (p1 + p2).sqrt())
}

/// Which source is receiving. `One` decodes `s₂`, `Two` decodes `s₁`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Destination {
    One,
    Two,
}

impl Destination {
    /// Source index of the receiver.
    pub fn receiver(self) -> usize {
        match self {
            Destination::One => 0,
            Destination::Two => 1,
        }
    }

    /// Source index of the transmitter whose symbols are decoded.
    pub fn transmitter(self) -> usize {
        1 - self.receiver()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h11: ComplexMatrix,
    pub h12: ComplexMatrix,
    pub h21: ComplexMatrix,
    pub h22: ComplexMatrix,
}

impl ChannelRealization {
    /// `H_{relay, source}` with zero-based indices.
    pub fn h(&self, relay: usize, source: usize) -> &ComplexMatrix {
        match (relay, source) {
            (0, 0) => &self.h11,
            (0, 1) => &self.h12,
            (1, 0) => &self.h21,
            (1, 1) => &self.h22,
            _ => panic!("channel index ({relay}, {source}) out of range"),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.h11.shape()
    }

    /// Every link equal to the same matrix.
    pub fn uniform(h: ComplexMatrix) -> Self {
        Self {
            h11: h.clone(),
            h12: h.clone(),
            h21: h.clone(),
            h22: h,
        }
    }
}

/// Rayleigh channels for one trial, deterministic in `(seed, trial)`.
pub fn generate_channels(config: &SystemConfig, trial: u64) -> ChannelRealization {
    generate_channels_attempt(config, trial, 0)
}

/// Redraw used when an earlier attempt for the same trial was degenerate.
pub fn generate_channels_attempt(config: &SystemConfig, trial: u64, attempt: u32) -> ChannelRealization {
    let mut rng = stream_rng(config.seed, trial, Purpose::Channel, attempt);
    let (n, m) = (config.n, config.m);
    let h11 = complex_normal_matrix(&mut rng, n, m);
    let h12 = complex_normal_matrix(&mut rng, n, m);
    let h21 = complex_normal_matrix(&mut rng, n, m);
    let h22 = complex_normal_matrix(&mut rng, n, m);
    ChannelRealization { h11, h12, h21, h22 }
}

/// Precoders, relay filters and receivers for one channel realization.
#[derive(Debug, Clone)]
pub struct BeamformerState {
    pub v1: ComplexMatrix,
    pub v2: ComplexMatrix,
    pub filters: [RelayFilter; 2],
    pub w1: ComplexMatrix,
    pub w2: ComplexMatrix,
    pub rho_r: f64,
    pub sigma2: f64,
    /// Factor bundle matching `filters` when they carry the triangular relay structure.
    pub factors: Option<TriangularFactors>,
}

impl BeamformerState {
    /// State with arbitrary filters and zero receivers.
    pub fn new(v1: ComplexMatrix, v2: ComplexMatrix, filters: [RelayFilter; 2], rho_r: f64, sigma2: f64) -> Self {
        let m = v1.rows();
        Self {
            v1,
            v2,
            filters,
            w1: ComplexMatrix::zeros(m, m),
            w2: ComplexMatrix::zeros(m, m),
            rho_r,
            sigma2,
            factors: None,
        }
    }

    pub fn precoder(&self, source: usize) -> &ComplexMatrix {
        if source == 0 {
            &self.v1
        } else {
            &self.v2
        }
    }

    pub fn receiver(&self, dest: Destination) -> &ComplexMatrix {
        match dest {
            Destination::One => &self.w1,
            Destination::Two => &self.w2,
        }
    }

    pub fn gains(&self) -> RelayGains {
        [self.filters[0].gains(), self.filters[1].gains()]
    }

    pub fn source_powers(&self) -> [f64; 2] {
        [self.v1.frobenius_norm().powi(2), self.v2.frobenius_norm().powi(2)]
    }

    /// Scales the precoders by positive reals. The unitary relay factors are
    /// invariant under this, so only the cached triangular factors change.
    pub fn scale_precoders(&mut self, c1: f64, c2: f64) {
        self.v1 = self.v1.scale(c1);
        self.v2 = self.v2.scale(c2);
        if let Some(f) = self.factors.as_mut() {
            f.rescale(c1, c2);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizer_examples() {
        assert!((power_normalizer(1.0, 1.0).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((power_normalizer(10.0, 10.0).unwrap() - 1.0 / 20f64.sqrt()).abs() < 1e-15);
        assert!((power_normalizer(0.5, 1.5).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(power_normalizer(0.0, 1.0).is_err());
    }

    #[test]
    fn channels_are_deterministic_per_trial() {
        let cfg = SystemConfig { seed: 11, ..SystemConfig::default() };
        assert_eq!(generate_channels(&cfg, 3), generate_channels(&cfg, 3));
        assert_ne!(generate_channels(&cfg, 3), generate_channels(&cfg, 4));
        assert_ne!(generate_channels(&cfg, 3), generate_channels_attempt(&cfg, 3, 1));
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        let bad = SystemConfig { m: 3, n: 2, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SystemConfig { a: 1.5, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
        let bad = SystemConfig { sigma2: 0.0, ..SystemConfig::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn triangular_forms_match_raw_forms() {
        for decomposition in [Decomposition::QlQr, Decomposition::Svd] {
            let cfg = SystemConfig { m: 2, n: 3, seed: 9, ..SystemConfig::default() };
            let ch = generate_channels(&cfg, 1);
            let mut rng = stream_rng(5, 0, Purpose::Oracle, 0);
            let v1 = complex_normal_matrix(&mut rng, 2, 2);
            let v2 = complex_normal_matrix(&mut rng, 2, 2);
            let gains = [vec![0.7, 1.3], vec![0.4, 0.9]];
            let (filters, factors) = assemble_filters(&ch, &v1, &v2, decomposition, &gains).unwrap();
            let st = BeamformerState::new(v1.clone(), v2, filters, cfg.rho_r(), cfg.sigma2);
            let h_raw = equivalent_channel(&ch, &st, Destination::One).unwrap();
            let c_raw = noise_covariance(&ch, &st, Destination::One).unwrap();
            let h_tri = factors.channel(&gains, st.rho_r);
            let c_tri = factors.noise(&gains, st.rho_r, st.sigma2);
            assert!((&v1.transpose() * &h_raw).distance(&h_tri) < 1e-10);
            assert!((&(&v1.transpose() * &c_raw) * &v1.conj()).distance(&c_tri) < 1e-10);
            if decomposition == Decomposition::QlQr {
                assert!(h_tri.is_upper_triangular(1e-12));
                let prod: f64 = factors.diagonal_products(&gains, st.rho_r).iter().product();
                let det = crate::linalg::determinant(&h_tri).unwrap();
                assert!((det.re - prod).abs() < 1e-10 * prod.abs() && det.im.abs() < 1e-10);
            }
        }
    }
}
