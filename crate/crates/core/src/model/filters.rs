use serde::{Deserialize, Serialize};

use super::{BeamformerState, ChannelRealization, ModelError, RelayPowerMode, SystemConfig, DEGENERATE_TOL};
use crate::linalg::{complete_unitary, ql_decompose, qr_decompose, svd, Complex64, ComplexMatrix};

/// Center-filter gains, one vector of length M per relay.
pub type RelayGains = [Vec<f64>; 2];

/// How the outer relay filters are derived from `H·V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decomposition {
    /// `F_L = Q_L*` from the QL of `H_{i,1}V₁`, `F_R = Q_Rᴴ` from the QR of `H_{i,2}V₂`.
    #[default]
    QlQr,
    /// Same pipeline with the unitaries taken from SVDs of the same products.
    Svd,
}

/// Relay filter `F = F_L · F_D · F_R` with a real nonnegative center.
///
/// `F_D` is N×M with gain `k` at entry `(offset + k, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayFilter {
    f_left: ComplexMatrix,
    f_center: ComplexMatrix,
    f_right: ComplexMatrix,
    offset: usize,
    composed: ComplexMatrix,
}

impl RelayFilter {
    pub fn new(f_left: ComplexMatrix, f_right: ComplexMatrix, gains: &[f64], offset: usize) -> Self {
        let n = f_left.rows();
        let m = gains.len();
        assert!(offset + m <= n, "center offset {offset} too large for {n}x{m}");
        let mut f_center = ComplexMatrix::zeros(n, m);
        for (k, &g) in gains.iter().enumerate() {
            f_center[(offset + k, k)] = Complex64::new(g, 0.0);
        }
        let composed = &(&f_left * &f_center) * &f_right;
        Self {
            f_left,
            f_center,
            f_right,
            offset,
            composed,
        }
    }

    /// All-zero filter for `m` streams and `n` relay antennas.
    pub fn zeros(m: usize, n: usize) -> Self {
        Self::new(ComplexMatrix::zeros(n, n), ComplexMatrix::zeros(m, n), &vec![0.0; m], n - m)
    }

    /// Unstructured filter: `F_L = f`, `F_D = F_R = I`.
    pub fn from_matrix(f: ComplexMatrix) -> Self {
        let n = f.rows();
        Self::new(f, ComplexMatrix::identity(n), &vec![1.0; n], 0)
    }

    pub fn f_left(&self) -> &ComplexMatrix {
        &self.f_left
    }

    pub fn f_center(&self) -> &ComplexMatrix {
        &self.f_center
    }

    pub fn f_right(&self) -> &ComplexMatrix {
        &self.f_right
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// The N×N product `F_L F_D F_R`.
    pub fn composed(&self) -> &ComplexMatrix {
        &self.composed
    }

    pub fn gains(&self) -> Vec<f64> {
        (0..self.f_center.cols())
            .map(|k| self.f_center[(self.offset + k, k)].re)
            .collect()
    }

    pub fn with_gains(&self, gains: &[f64]) -> Self {
        Self::new(self.f_left.clone(), self.f_right.clone(), gains, self.offset)
    }
}

/// Per-relay pieces of the triangular channel `Ĥ₁ = ρ Σᵢ Aᵢ diag(fᵢ) Bᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayFactors {
    /// `L_iᵀ` restricted to its M×M triangle (upper triangular), or `W̄ Σ` for SVD.
    pub a: ComplexMatrix,
    /// `R_i` (upper triangular), or `Σ Wᴴ` for SVD.
    pub b: ComplexMatrix,
    pub l_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
}

/// Factor bundle for link 1 in triangular coordinates.
///
/// Relative to the raw equivalent channel these forms carry the receive
/// prefilter `V₁ᵀ`: `Ĥ₁ = V₁ᵀH̃₁` and `Ĉ₁ = V₁ᵀC₁V₁*`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangularFactors {
    pub decomposition: Decomposition,
    pub relays: [RelayFactors; 2],
    /// `V₁ᵀV₁*`, the prefiltered destination-noise covariance over σ².
    pub receive_gram: ComplexMatrix,
}

impl TriangularFactors {
    pub fn m(&self) -> usize {
        self.receive_gram.rows()
    }

    /// `Ĥ₁ = ρ Σᵢ Aᵢ diag(fᵢ) Bᵢ`.
    pub fn channel(&self, gains: &RelayGains, rho: f64) -> ComplexMatrix {
        let m = self.m();
        let mut h = ComplexMatrix::zeros(m, m);
        for (rf, f) in self.relays.iter().zip(gains) {
            for r in 0..m {
                for c in 0..m {
                    let mut s = Complex64::new(0.0, 0.0);
                    for k in 0..m {
                        s += rf.a[(r, k)] * f[k] * rf.b[(k, c)];
                    }
                    h[(r, c)] += s * rho;
                }
            }
        }
        h
    }

    /// `Ĉ₁ = σ²(ρ² Σᵢ Aᵢ diag(fᵢ²) Aᵢᴴ + V₁ᵀV₁*)`.
    pub fn noise(&self, gains: &RelayGains, rho: f64, sigma2: f64) -> ComplexMatrix {
        let m = self.m();
        let mut c = self.receive_gram.clone();
        for (rf, f) in self.relays.iter().zip(gains) {
            for r in 0..m {
                for s in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..m {
                        acc += rf.a[(r, k)] * (f[k] * f[k]) * rf.a[(s, k)].conj();
                    }
                    c[(r, s)] += acc * (rho * rho);
                }
            }
        }
        c.scale(sigma2)
    }

    /// `ς_k = ρ Σᵢ l_{ik} f_{ik} r_{ik}`.
    pub fn diagonal_products(&self, gains: &RelayGains, rho: f64) -> Vec<f64> {
        (0..self.m())
            .map(|k| {
                rho * self
                    .relays
                    .iter()
                    .zip(gains)
                    .map(|(rf, f)| rf.l_diag[k] * f[k] * rf.r_diag[k])
                    .sum::<f64>()
            })
            .collect()
    }

    /// Follows a real rescaling `V₁ → c₁V₁`, `V₂ → c₂V₂`.
    pub fn rescale(&mut self, c1: f64, c2: f64) {
        for rf in self.relays.iter_mut() {
            rf.a = rf.a.scale(c1);
            rf.b = rf.b.scale(c2);
            rf.l_diag.iter_mut().for_each(|x| *x *= c1);
            rf.r_diag.iter_mut().for_each(|x| *x *= c2);
        }
        self.receive_gram = self.receive_gram.scale(c1 * c1);
    }
}

fn check_diagonal(relay: usize, values: &[f64]) -> Result<(), ModelError> {
    for (index, &value) in values.iter().enumerate() {
        if !(value.abs() >= DEGENERATE_TOL) {
            return Err(ModelError::DegenerateChannel { relay, index, value });
        }
    }
    Ok(())
}

fn check_shapes(ch: &ChannelRealization, v1: &ComplexMatrix, v2: &ComplexMatrix) -> Result<(), ModelError> {
    let (n, m) = ch.shape();
    if n < m || v1.shape() != (m, m) || v2.shape() != (m, m) {
        return Err(ModelError::Dimension(format!(
            "channels {n}x{m} with precoders {:?} and {:?}",
            v1.shape(),
            v2.shape()
        )));
    }
    Ok(())
}

/// Outer filters `(F_L, F_R, offset)` per relay and the matching factor bundle.
pub fn triangular_factors(
    ch: &ChannelRealization,
    v1: &ComplexMatrix,
    v2: &ComplexMatrix,
    decomposition: Decomposition,
) -> Result<([(ComplexMatrix, ComplexMatrix, usize); 2], TriangularFactors), ModelError> {
    check_shapes(ch, v1, v2)?;
    let (n, m) = ch.shape();
    let mut outer = Vec::with_capacity(2);
    let mut relays = Vec::with_capacity(2);
    for i in 0..2 {
        let g1 = ch.h(i, 0) * v1;
        let g2 = ch.h(i, 1) * v2;
        match decomposition {
            Decomposition::QlQr => {
                let ql = ql_decompose(&g1)?;
                let qr = qr_decompose(&g2)?;
                let l_diag = ql.l_diagonal();
                let r_diag = qr.r_diagonal();
                check_diagonal(i, &l_diag)?;
                check_diagonal(i, &r_diag)?;
                relays.push(RelayFactors {
                    a: ql.l_block().transpose(),
                    b: qr.r.clone(),
                    l_diag,
                    r_diag,
                });
                outer.push((ql.q.conj(), qr.q.adjoint(), n - m));
            }
            Decomposition::Svd => {
                let s1 = svd(&g1)?;
                let s2 = svd(&g2)?;
                check_diagonal(i, &s1.sigma)?;
                check_diagonal(i, &s2.sigma)?;
                let u1 = complete_unitary(&s1.u)?;
                relays.push(RelayFactors {
                    a: &s1.v_adjoint.transpose() * &ComplexMatrix::diag_real(&s1.sigma),
                    b: &ComplexMatrix::diag_real(&s2.sigma) * &s2.v_adjoint,
                    l_diag: s1.sigma.clone(),
                    r_diag: s2.sigma.clone(),
                });
                outer.push((u1.conj(), s2.u.adjoint(), 0));
            }
        }
    }
    let outer: [(ComplexMatrix, ComplexMatrix, usize); 2] = outer.try_into().expect("two relays");
    let relays: [RelayFactors; 2] = relays.try_into().expect("two relays");
    let factors = TriangularFactors {
        decomposition,
        relays,
        receive_gram: &v1.transpose() * &v1.conj(),
    };
    Ok((outer, factors))
}

/// Structured filters with the given center gains.
pub fn assemble_filters(
    ch: &ChannelRealization,
    v1: &ComplexMatrix,
    v2: &ComplexMatrix,
    decomposition: Decomposition,
    gains: &RelayGains,
) -> Result<([RelayFilter; 2], TriangularFactors), ModelError> {
    let (outer, factors) = triangular_factors(ch, v1, v2, decomposition)?;
    let [(l0, r0, o0), (l1, r1, o1)] = outer;
    Ok((
        [RelayFilter::new(l0, r0, &gains[0], o0), RelayFilter::new(l1, r1, &gains[1], o1)],
        factors,
    ))
}

/// Structured filters with the equal-split starting gains.
pub fn assemble_structured_filters(
    ch: &ChannelRealization,
    config: &SystemConfig,
    v1: &ComplexMatrix,
    v2: &ComplexMatrix,
    decomposition: Decomposition,
) -> Result<([RelayFilter; 2], TriangularFactors), ModelError> {
    let m = config.m;
    let (filters, factors) = assemble_filters(ch, v1, v2, decomposition, &[vec![0.0; m], vec![0.0; m]])?;
    let rho = config.rho_r();
    let weights = [0, 1].map(|i| {
        let d = relay_input_covariance(ch, v1, v2, rho, config.sigma2, i);
        projected_weights(filters[i].f_right(), &d)
    });
    let gains = initial_gains(config, &weights);
    Ok(([filters[0].with_gains(&gains[0]), filters[1].with_gains(&gains[1])], factors))
}

/// `D_i = ρ²(H_{i,1}V₁V₁ᴴH_{i,1}ᴴ + H_{i,2}V₂V₂ᴴH_{i,2}ᴴ + σ²I)`.
pub fn relay_input_covariance(
    ch: &ChannelRealization,
    v1: &ComplexMatrix,
    v2: &ComplexMatrix,
    rho: f64,
    sigma2: f64,
    relay: usize,
) -> ComplexMatrix {
    let g1 = ch.h(relay, 0) * v1;
    let g2 = ch.h(relay, 1) * v2;
    let d = &(&g1 * &g1.adjoint()) + &(&g2 * &g2.adjoint());
    d.add_diagonal(sigma2).scale(rho * rho)
}

/// `g_k = (F_R D F_Rᴴ)_{kk}`, so that `tr(F D Fᴴ) = Σ_k f_k² g_k`.
pub fn projected_weights(f_right: &ComplexMatrix, d: &ComplexMatrix) -> Vec<f64> {
    let fd = f_right * d;
    (0..f_right.rows())
        .map(|k| {
            (0..f_right.cols())
                .map(|j| fd[(k, j)] * f_right[(k, j)].conj())
                .sum::<Complex64>()
                .re
        })
        .collect()
}

/// Equal-split gains meeting the relay budget with equality.
pub fn initial_gains(config: &SystemConfig, weights: &[Vec<f64>; 2]) -> RelayGains {
    let budgets = match config.relay_power {
        RelayPowerMode::Total => [0.5 * config.pr, 0.5 * config.pr],
        RelayPowerMode::PerRelay => config.relay_budgets(),
    };
    [0, 1].map(|i| {
        let total: f64 = weights[i].iter().sum();
        let g = if total > 0.0 { (budgets[i] / total).sqrt() } else { 0.0 };
        vec![g; weights[i].len()]
    })
}

/// `tr(F_i D_i F_iᴴ)` per relay, from the dense composed filters.
pub fn relay_power(ch: &ChannelRealization, state: &BeamformerState) -> [f64; 2] {
    [0, 1].map(|i| {
        let d = relay_input_covariance(ch, &state.v1, &state.v2, state.rho_r, state.sigma2, i);
        let f = state.filters[i].composed();
        (&(f * &d) * &f.adjoint()).trace().re
    })
}
