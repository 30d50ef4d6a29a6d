//! Iterative QL-QR transceiver design: Wiener receivers, closed-form source
//! precoders, determinant-maximizing relay gains and MSE balancing.

mod balance;
mod detmax;
mod precoder;
mod receiver;

pub use balance::{balance_mse, BalanceInfo};
pub use detmax::{solve_detmax, DetMaxProblem, DetMaxSolution, NoiseCoupling, RelayBudget};
pub use precoder::{
    link_phi, precoder_objective, precoder_problem, solve_precoder, update_source_precoder, PrecoderProblem,
    PrecoderSolution, PrecoderUpdate,
};
pub use receiver::{link_mse, mse_closed_form, mse_matrix, update_receivers, wiener_receiver, MseReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{
    assemble_filters, assemble_structured_filters, equivalent_channel, BeamformerState, ChannelRealization,
    Decomposition, Destination, ModelError, RelayGains, SystemConfig,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("state carries no triangular factors")]
    MissingFactors,
    #[error("shape error: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QlqrOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub detmax_outer_rounds: usize,
    pub balance_tol: f64,
    #[serde(default)]
    pub decomposition: Decomposition,
}

impl Default for QlqrOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 100,
            detmax_outer_rounds: 30,
            balance_tol: 1e-12,
            decomposition: Decomposition::QlQr,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QlqrOutcome {
    pub state: BeamformerState,
    /// One report per iteration; entry 0 is the balanced starting point.
    pub history: Vec<MseReport>,
    pub converged: bool,
    pub iterations: usize,
    pub precoder_fallbacks: usize,
    pub detmax_unconverged: usize,
    /// Iterations where the full update was rejected in favor of a damped one.
    pub damped_steps: usize,
}

impl QlqrOutcome {
    pub fn final_report(&self) -> &MseReport {
        self.history.last().expect("history is never empty")
    }
}

struct Counters {
    precoder_fallbacks: usize,
    detmax_unconverged: usize,
}

fn with_gains(
    ch: &ChannelRealization,
    state: &BeamformerState,
    decomposition: Decomposition,
    gains: &RelayGains,
) -> Result<BeamformerState, OptimizerError> {
    let (filters, factors) = assemble_filters(ch, &state.v1, &state.v2, decomposition, gains)?;
    let mut s = state.clone();
    s.filters = filters;
    s.factors = Some(factors);
    Ok(s)
}

/// `‖V₁ᵀH̃₁ − Ĥ₁‖` relative to `‖Ĥ₁‖`.
pub fn dual_formula_defect(ch: &ChannelRealization, state: &BeamformerState) -> Result<f64, OptimizerError> {
    let factors = state.factors.as_ref().ok_or(OptimizerError::MissingFactors)?;
    let raw = &state.v1.transpose() * &equivalent_channel(ch, state, Destination::One)?;
    let tri = factors.channel(&state.gains(), state.rho_r);
    Ok(raw.distance(&tri) / tri.frobenius_norm().max(f64::MIN_POSITIVE))
}

/// Balances and evaluates a candidate, returning it with its report.
fn finish(
    ch: &ChannelRealization,
    candidate: &BeamformerState,
    options: &QlqrOptions,
    iteration: usize,
) -> Result<(BeamformerState, MseReport), OptimizerError> {
    let (mut s, _) = balance_mse(ch, candidate, options.balance_tol)?;
    let report = update_receivers(ch, &mut s, iteration)?;
    if cfg!(debug_assertions) {
        let defect = dual_formula_defect(ch, &s)?;
        debug_assert!(defect < 1e-8, "triangular and raw channels disagree: {defect:e}");
    }
    Ok((s, report))
}

/// One pass of W, V₂, V₁, filter re-assembly, det-max and balancing, with
/// damped fallbacks. Returns `None` when no candidate improves the balanced
/// objective `max(tr MSE₁, tr MSE₂)`.
fn step(
    ch: &ChannelRealization,
    state: &BeamformerState,
    config: &SystemConfig,
    options: &QlqrOptions,
    iteration: usize,
    current: f64,
    counters: &mut Counters,
) -> Result<Option<(BeamformerState, MseReport, bool)>, OptimizerError> {
    let mut s = state.clone();
    let u2 = update_source_precoder(ch, &s, config, 1)?;
    counters.precoder_fallbacks += usize::from(u2.fallback);
    s.v2 = u2.v;
    let u1 = update_source_precoder(ch, &s, config, 0)?;
    counters.precoder_fallbacks += usize::from(u1.fallback);
    s.v1 = u1.v;

    let mut bases = Vec::with_capacity(2);
    match assemble_structured_filters(ch, config, &s.v1, &s.v2, options.decomposition) {
        Ok((filters, factors)) => {
            let mut moved = s.clone();
            moved.filters = filters;
            moved.factors = Some(factors);
            bases.push(moved);
        }
        Err(ModelError::DegenerateChannel { .. }) => {}
        Err(e) => return Err(e.into()),
    }
    // Same precoders as before, only the gains re-optimized.
    bases.push(state.clone());

    for (b, base) in bases.iter().enumerate() {
        let problem = DetMaxProblem::from_state(ch, base, config, options.detmax_outer_rounds)?;
        let sol = solve_detmax(&problem)?;
        counters.detmax_unconverged += usize::from(!sol.converged);
        let start = base.gains();
        let mut t = 1.0;
        for _ in 0..6 {
            let gains: RelayGains =
                [0, 1].map(|i| sol.gains[i].iter().zip(&start[i]).map(|(a, b)| t * a + (1.0 - t) * b).collect());
            let candidate = with_gains(ch, base, options.decomposition, &gains)?;
            let (cand, report) = finish(ch, &candidate, options, iteration)?;
            if report.worst() <= current {
                return Ok(Some((cand, report, b > 0 || t < 1.0)));
            }
            t *= 0.5;
        }
    }
    Ok(None)
}

/// Alternating QL-QR design for one channel realization.
///
/// Stops when `|Δ tr MSE₁| / tr MSE₁ < tol` or after `max_iters` iterations.
/// A step is only taken when it does not raise `max(tr MSE₁, tr MSE₂)`; after
/// balancing both traces coincide, so the recorded `tr MSE₁` is non-increasing.
pub fn run_qlqr(
    ch: &ChannelRealization,
    config: &SystemConfig,
    options: &QlqrOptions,
) -> Result<QlqrOutcome, OptimizerError> {
    config.validate()?;
    if ch.shape() != (config.n, config.m) {
        return Err(OptimizerError::Shape(format!(
            "channels are {:?}, config says {}x{}",
            ch.shape(),
            config.n,
            config.m
        )));
    }
    let m = config.m as f64;
    let v1 = crate::linalg::ComplexMatrix::identity(config.m).scale((config.p1 / m).sqrt());
    let v2 = crate::linalg::ComplexMatrix::identity(config.m).scale((config.p2 / m).sqrt());
    let (filters, factors) = assemble_structured_filters(ch, config, &v1, &v2, options.decomposition)?;
    let mut init = BeamformerState::new(v1, v2, filters, config.rho_r(), config.sigma2);
    init.factors = Some(factors);
    let (mut state, report) = finish(ch, &init, options, 0)?;

    let mut history = vec![report];
    let mut counters = Counters {
        precoder_fallbacks: 0,
        detmax_unconverged: 0,
    };
    let mut damped_steps = 0;
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=options.max_iters {
        iterations = it;
        let prev = history.last().unwrap().clone();
        match step(ch, &state, config, options, it, prev.worst(), &mut counters)? {
            Some((next, report, damped)) => {
                damped_steps += usize::from(damped);
                let rel = (prev.tr1 - report.tr1).abs() / prev.tr1.max(f64::MIN_POSITIVE);
                state = next;
                history.push(report);
                if rel < options.tol {
                    converged = true;
                    break;
                }
            }
            None => {
                let mut same = prev;
                same.iteration = it;
                history.push(same);
                converged = true;
                break;
            }
        }
    }
    Ok(QlqrOutcome {
        state,
        history,
        converged,
        iterations,
        precoder_fallbacks: counters.precoder_fallbacks,
        detmax_unconverged: counters.detmax_unconverged,
        damped_steps,
    })
}
