use crate::linalg::{hermitian_eigen, hermitian_inv_sqrt, hermitian_sqrt, inverse, solve, ComplexMatrix};
use crate::model::{noise_covariance, BeamformerState, ChannelRealization, Destination, RelayPowerMode, SystemConfig};

use super::OptimizerError;

const ROOT_ITERS: usize = 200;
const RESIDUAL_TOL: f64 = 1e-11;
/// Smallest precoder covariance eigenvalue relative to the largest.
const RANK_FLOOR: f64 = 1e-6;

/// `min tr[I + VᴴΦV]⁻¹  s.t.  tr(VVᴴ) ≤ P,  tr(VᴴΨV) ≤ B`.
#[derive(Debug, Clone)]
pub struct PrecoderProblem {
    pub phi: ComplexMatrix,
    pub psi: ComplexMatrix,
    pub source_budget: f64,
    pub relay_budget: f64,
}

#[derive(Debug, Clone)]
pub struct PrecoderSolution {
    pub v: ComplexMatrix,
    pub mu_source: f64,
    pub mu_relay: f64,
    /// Multiplier search was impossible; `v` is the capped scaled identity.
    pub fallback: bool,
}

/// `tr[I + VᴴΦV]⁻¹`.
pub fn precoder_objective(phi: &ComplexMatrix, v: &ComplexMatrix) -> f64 {
    let k = (&(&v.adjoint() * phi) * v).hermitian_part().add_diagonal(1.0);
    match inverse(&k) {
        Ok(inv) => inv.trace().re,
        Err(_) => f64::INFINITY,
    }
}

impl PrecoderProblem {
    /// Optimal `VVᴴ` for fixed multipliers:
    /// with `A = μ_s I + μ_r Ψ` and `A^{-1/2}ΦA^{-1/2} = EΛEᴴ`,
    /// `VVᴴ = A^{-1/2} E diag((λ^{-1/2} − λ^{-1})⁺) Eᴴ A^{-1/2}`.
    fn allocation(&self, mu_s: f64, mu_r: f64) -> Result<ComplexMatrix, OptimizerError> {
        let m = self.phi.rows();
        let a_inv_sqrt = if mu_r == 0.0 {
            ComplexMatrix::identity(m).scale(1.0 / mu_s.sqrt())
        } else {
            hermitian_inv_sqrt(&self.psi.scale(mu_r).add_diagonal(mu_s))?
        };
        let phi_w = (&(&a_inv_sqrt * &self.phi) * &a_inv_sqrt).hermitian_part();
        let eig = hermitian_eigen(&phi_w)?;
        let inner = eig.reconstruct_with(|l| if l > 1.0 { l.sqrt().recip() - l.recip() } else { 0.0 });
        Ok((&(&a_inv_sqrt * &inner) * &a_inv_sqrt).hermitian_part())
    }

    fn source_use(x: &ComplexMatrix) -> f64 {
        x.trace().re
    }

    fn relay_use(&self, x: &ComplexMatrix) -> f64 {
        (&self.psi * x).trace().re
    }

    fn psi_is_definite(&self) -> bool {
        match hermitian_eigen(&self.psi) {
            Ok(e) => {
                let top = e.values[0];
                let low = *e.values.last().unwrap();
                top > 0.0 && low > 1e-10 * top
            }
            Err(_) => false,
        }
    }
}

/// Finds `μ` with `usage(μ) = target` for a usage nonincreasing in `μ`.
///
/// Works on `t = ln μ` with an Illinois-modified regula falsi and returns the
/// root on the feasible side (`usage ≤ target`). `None` if usage stays at or
/// below the target as `μ → 0`.
fn find_multiplier(
    target: f64,
    mut usage: impl FnMut(f64) -> Result<f64, OptimizerError>,
) -> Result<Option<f64>, OptimizerError> {
    let mut h = |t: f64| -> Result<f64, OptimizerError> { Ok(usage(t.exp())? - target) };
    let (mut lo, mut hi);
    let (mut h_lo, mut h_hi);
    let h0 = h(0.0)?;
    if h0 > 0.0 {
        lo = 0.0;
        h_lo = h0;
        hi = 4.0;
        h_hi = h(hi)?;
        while h_hi > 0.0 {
            lo = hi;
            h_lo = h_hi;
            hi += 4.0;
            if hi > 700.0 {
                return Ok(Some(hi.exp()));
            }
            h_hi = h(hi)?;
        }
    } else {
        hi = 0.0;
        h_hi = h0;
        lo = -4.0;
        h_lo = h(lo)?;
        while h_lo <= 0.0 {
            hi = lo;
            h_hi = h_lo;
            lo -= 4.0;
            if lo < -700.0 {
                return Ok(None);
            }
            h_lo = h(lo)?;
        }
    }
    let tol = RESIDUAL_TOL * target.abs().max(f64::MIN_POSITIVE);
    let mut side = 0i8;
    let mut residual_hi = h_hi;
    for it in 0..ROOT_ITERS {
        if -residual_hi <= tol || hi - lo <= 1e-15 * (1.0 + hi.abs()) {
            break;
        }
        let secant = hi - h_hi * (hi - lo) / (h_hi - h_lo);
        let t = if it % 5 == 4 || !(secant > lo && secant < hi) {
            0.5 * (lo + hi)
        } else {
            secant
        };
        let ht = h(t)?;
        if ht > 0.0 {
            lo = t;
            h_lo = ht;
            if side == -1 {
                h_hi *= 0.5;
            }
            side = -1;
        } else {
            hi = t;
            h_hi = ht;
            residual_hi = ht;
            if side == 1 {
                h_lo *= 0.5;
            }
            side = 1;
        }
    }
    Ok(Some(hi.exp()))
}

/// Lifts eigenvalues below `RANK_FLOOR · λ_max` so the precoder stays invertible.
fn floor_spectrum(x: &ComplexMatrix) -> Result<ComplexMatrix, OptimizerError> {
    let eig = hermitian_eigen(x)?;
    let floor = RANK_FLOOR * eig.values[0].max(0.0);
    Ok(eig.reconstruct_with(|l| l.max(floor)).hermitian_part())
}

/// KKT solution with multipliers found by nested one-dimensional searches:
/// relay slack first, then source slack, then both constraints active.
pub fn solve_precoder(p: &PrecoderProblem) -> Result<PrecoderSolution, OptimizerError> {
    let m = p.phi.rows();
    let fallback = || {
        let cap = (p.source_budget / m as f64).max(0.0);
        let relay_per_unit = p.psi.trace().re;
        let c2 = if relay_per_unit > 0.0 {
            cap.min(p.relay_budget.max(0.0) / relay_per_unit)
        } else {
            cap
        };
        PrecoderSolution {
            v: ComplexMatrix::identity(m).scale(c2.sqrt()),
            mu_source: 0.0,
            mu_relay: 0.0,
            fallback: true,
        }
    };
    if !(p.source_budget > 0.0 && p.relay_budget > 0.0) || p.phi.max_abs() == 0.0 {
        return Ok(fallback());
    }

    let relay_ok = |x: &ComplexMatrix| p.relay_use(x) <= p.relay_budget * (1.0 + 1e-12);
    let source_ok = |x: &ComplexMatrix| PrecoderProblem::source_use(x) <= p.source_budget * (1.0 + 1e-12);

    // Relay constraint slack: μ_r = 0.
    let mu_s = find_multiplier(p.source_budget, |mu| {
        Ok(PrecoderProblem::source_use(&p.allocation(mu, 0.0)?))
    })?;
    let Some(mu_s) = mu_s else {
        return Ok(fallback());
    };
    let x = p.allocation(mu_s, 0.0)?;
    let (x, mu_s, mu_r) = if relay_ok(&x) {
        (x, mu_s, 0.0)
    } else {
        let definite = p.psi_is_definite();
        let mut found = None;
        if definite {
            // Source constraint slack: μ_s = 0.
            if let Some(mu_r) = find_multiplier(p.relay_budget, |mu| Ok(p.relay_use(&p.allocation(0.0, mu)?)))? {
                let x = p.allocation(0.0, mu_r)?;
                if source_ok(&x) {
                    found = Some((x, 0.0, mu_r));
                }
            }
        }
        match found {
            Some(f) => f,
            None => {
                // Both active: outer search on μ_r, inner on μ_s.
                let inner = |mu_r: f64| -> Result<f64, OptimizerError> {
                    if definite && source_ok(&p.allocation(0.0, mu_r)?) {
                        return Ok(0.0);
                    }
                    let mu = find_multiplier(p.source_budget, |mu| {
                        Ok(PrecoderProblem::source_use(&p.allocation(mu, mu_r)?))
                    })?;
                    Ok(mu.unwrap_or((-700f64).exp()))
                };
                let mu_r = find_multiplier(p.relay_budget, |mu_r| {
                    let mu_s = inner(mu_r)?;
                    Ok(p.relay_use(&p.allocation(mu_s, mu_r)?))
                })?;
                let Some(mu_r) = mu_r else {
                    return Ok(fallback());
                };
                let mu_s = inner(mu_r)?;
                (p.allocation(mu_s, mu_r)?, mu_s, mu_r)
            }
        }
    };

    let v = hermitian_sqrt(&floor_spectrum(&x)?)?;
    let s_use = v.frobenius_norm().powi(2);
    let r_use = p.relay_use(&(&v * &v.adjoint()));
    let mut c2: f64 = 1.0;
    if s_use > p.source_budget {
        c2 = c2.min(p.source_budget / s_use);
    }
    if r_use > p.relay_budget {
        c2 = c2.min(p.relay_budget / r_use);
    }
    Ok(PrecoderSolution {
        v: v.scale(c2.sqrt()),
        mu_source: mu_s,
        mu_relay: mu_r,
        fallback: false,
    })
}

#[derive(Debug, Clone)]
pub struct PrecoderUpdate {
    pub v: ComplexMatrix,
    pub fallback: bool,
    /// The candidate did not improve on the previous precoder, which was kept.
    pub kept_previous: bool,
}

/// `Φ = GᴴC⁻¹G` for the link that decodes source `which`, where
/// `G = ρ Σᵢ H_{i,r}ᵀ Fᵢ H_{i,t}` so that `H̃ = G V_t`.
pub fn link_phi(ch: &ChannelRealization, state: &BeamformerState, which: usize) -> Result<ComplexMatrix, OptimizerError> {
    let (t, r) = (which, 1 - which);
    let dest = if t == 1 { Destination::One } else { Destination::Two };
    let m = ch.shape().1;
    let mut g = ComplexMatrix::zeros(m, m);
    for i in 0..2 {
        g = &g + &(&(&ch.h(i, r).transpose() * state.filters[i].composed()) * ch.h(i, t));
    }
    let g = g.scale(state.rho_r);
    let c = noise_covariance(ch, state, dest)?;
    Ok((&g.adjoint() * &solve(&c, &g)?).hermitian_part())
}

/// The precoder subproblem for source `which` (0 or 1) with relay filters, the
/// other precoder and the noise held fixed. Also returns the per-relay cost
/// matrices and the relay power already committed by the other source and noise.
pub fn precoder_problem(
    ch: &ChannelRealization,
    state: &BeamformerState,
    config: &SystemConfig,
    which: usize,
) -> Result<(PrecoderProblem, [ComplexMatrix; 2], [f64; 2]), OptimizerError> {
    let (t, r) = (which, 1 - which);
    let rho = state.rho_r;
    let mut fixed = [0.0; 2];
    let psi_i = [0, 1].map(|i| {
        let f = state.filters[i].composed();
        let other = ch.h(i, r) * state.precoder(r);
        let d = (&other * &other.adjoint()).add_diagonal(state.sigma2);
        fixed[i] = rho * rho * (&(f * &d) * &f.adjoint()).trace().re;
        let fh = f * ch.h(i, t);
        (&fh.adjoint() * &fh).scale(rho * rho).hermitian_part()
    });
    let problem = PrecoderProblem {
        phi: link_phi(ch, state, which)?,
        psi: &psi_i[0] + &psi_i[1],
        source_budget: config.source_power(t),
        relay_budget: config.pr - fixed[0] - fixed[1],
    };
    Ok((problem, psi_i, fixed))
}

/// Closed-form precoder update for source `which` (0 or 1).
pub fn update_source_precoder(
    ch: &ChannelRealization,
    state: &BeamformerState,
    config: &SystemConfig,
    which: usize,
) -> Result<PrecoderUpdate, OptimizerError> {
    let (problem, psi_i, fixed) = precoder_problem(ch, state, config, which)?;
    let sol = solve_precoder(&problem)?;
    let mut v = sol.v;
    if config.relay_power == RelayPowerMode::PerRelay {
        let budgets = config.relay_budgets();
        let vv = &v * &v.adjoint();
        let mut c2: f64 = 1.0;
        for i in 0..2 {
            let used = (&psi_i[i] * &vv).trace().re;
            if used > 0.0 {
                c2 = c2.min(((budgets[i] - fixed[i]) / used).max(0.0));
            }
        }
        v = v.scale(c2.sqrt());
    }
    let old = state.precoder(which);
    if precoder_objective(&problem.phi, &v) <= precoder_objective(&problem.phi, old) {
        Ok(PrecoderUpdate {
            v,
            fallback: sol.fallback,
            kept_previous: false,
        })
    } else {
        Ok(PrecoderUpdate {
            v: old.clone(),
            fallback: sol.fallback,
            kept_previous: true,
        })
    }
}
