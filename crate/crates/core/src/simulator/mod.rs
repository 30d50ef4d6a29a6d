//! Monte Carlo harness: sum mutual information and QPSK bit error rate over
//! independent channel trials, plus the triangular/SVD determinant check.

mod ber;
mod metrics;

pub use ber::{count_bit_errors, qpsk_map, qpsk_slice, BitCount};
pub use metrics::{smi_of_state, svd_equivalence_check, SmiReport, SvdEquivalenceReport, SVD_EQUIVALENCE_TOL};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::model::{generate_channels_attempt, ChannelRealization, Decomposition, ModelError, SystemConfig};
use crate::optimizer::{run_qlqr, OptimizerError, QlqrOptions, QlqrOutcome};
use crate::rng::{stream_rng, Purpose};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("MSE matrix is singular")]
    SingularMse,
    #[error("state carries no QL-QR factors")]
    MissingFactors,
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Fresh channel draws tried per trial before it is given up as degenerate.
pub const MAX_CHANNEL_ATTEMPTS: u32 = 8;
/// Excluded fraction at or above which a point is flagged.
pub const EXCLUSION_FLAG: f64 = 0.01;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Sweep values are relay powers `P_R` in dB.
    SmiVsPr,
    /// Sweep values are relay counts; pairs of relays act as independent systems.
    SmiVsRelaysStub,
    /// Sweep values are `P₁/σ² = P₂/σ²` in dB with `P_R` fixed.
    BerVsSnr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub config: SystemConfig,
    pub sweep: Vec<f64>,
    pub trials: usize,
    pub symbols_per_trial: usize,
    pub options: QlqrOptions,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, config: SystemConfig, sweep: Vec<f64>) -> Self {
        Self {
            kind,
            config,
            sweep,
            trials: 1000,
            symbols_per_trial: 10_000,
            options: QlqrOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.config.validate()?;
        if self.trials == 0 {
            return Err(SimError::InvalidSpec("trials must be >= 1".into()));
        }
        if self.sweep.is_empty() {
            return Err(SimError::InvalidSpec("sweep is empty".into()));
        }
        if self.sweep.iter().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidSpec("sweep values must be finite".into()));
        }
        match self.kind {
            ExperimentKind::SmiVsRelaysStub => {
                if self.sweep.iter().any(|&z| z < 2.0 || z.fract() != 0.0 || !(z as u64).is_multiple_of(2)) {
                    return Err(SimError::InvalidSpec("relay counts must be even integers >= 2".into()));
                }
            }
            ExperimentKind::BerVsSnr => {
                if self.symbols_per_trial == 0 {
                    return Err(SimError::InvalidSpec("symbols_per_trial must be >= 1".into()));
                }
            }
            ExperimentKind::SmiVsPr => {}
        }
        Ok(())
    }

    /// System configuration at one sweep value.
    pub fn point_config(&self, x: f64) -> SystemConfig {
        let mut c = self.config.clone();
        match self.kind {
            ExperimentKind::SmiVsPr => c.pr = db_to_linear(x),
            ExperimentKind::BerVsSnr => {
                c.p1 = db_to_linear(x) * c.sigma2;
                c.p2 = c.p1;
            }
            ExperimentKind::SmiVsRelaysStub => {}
        }
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub point: f64,
    pub metric: String,
    pub mean: f64,
    pub std_err: f64,
    pub trials_converged: usize,
    pub trials_total: usize,
    pub mean_iterations: f64,
    /// Excluded fraction reached [`EXCLUSION_FLAG`].
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<PointResult>,
    /// Largest `|smi − smi_dual|` over used trials, in bits.
    pub max_dual_gap: f64,
    pub svd_checks: usize,
    pub svd_check_failures: usize,
}

impl ExperimentResult {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }

    pub fn row(&self, point: f64, metric: &str) -> Option<&PointResult> {
        self.rows.iter().find(|r| r.point == point && r.metric == metric)
    }
}

pub const RESULTS_HEADER: &str = "point,metric,mean,std_err,trials_converged,trials_total";

pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{:e},{:e},{},{}",
            r.point, r.metric, r.mean, r.std_err, r.trials_converged, r.trials_total
        );
    }
    out
}

/// Mean and standard error (sample deviation over `√n`).
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// An optimized trial and the channel it was run on.
#[derive(Debug, Clone)]
pub struct OptimizedTrial {
    pub channels: ChannelRealization,
    pub outcome: QlqrOutcome,
    pub attempt: u32,
}

/// Runs the design on trial `trial`, redrawing channels whose triangular
/// factors are degenerate. `None` when every attempt fails.
pub fn optimize_trial(config: &SystemConfig, options: &QlqrOptions, trial: u64) -> Option<OptimizedTrial> {
    for attempt in 0..MAX_CHANNEL_ATTEMPTS {
        let channels = generate_channels_attempt(config, trial, attempt);
        match run_qlqr(&channels, config, options) {
            Ok(outcome) => {
                return Some(OptimizedTrial {
                    channels,
                    outcome,
                    attempt,
                })
            }
            Err(OptimizerError::Model(ModelError::DegenerateChannel { .. })) => continue,
            Err(_) => return None,
        }
    }
    None
}

struct TrialValues {
    /// One value per metric, `None` when the trial is excluded.
    values: Option<Vec<f64>>,
    iterations: usize,
    dual_gap: f64,
    svd_checked: bool,
    svd_passed: bool,
}

impl TrialValues {
    fn excluded(iterations: usize) -> Self {
        Self {
            values: None,
            iterations,
            dual_gap: 0.0,
            svd_checked: false,
            svd_passed: true,
        }
    }
}

fn smi_trial(config: &SystemConfig, options: &QlqrOptions, trial: u64, groups: usize) -> TrialValues {
    let mut total = 0.0;
    let mut iterations = 0;
    let mut gap: f64 = 0.0;
    let (mut checked, mut passed) = (false, true);
    for g in 0..groups {
        let mut c = config.clone();
        c.seed = group_seed(config.seed, g);
        let Some(t) = optimize_trial(&c, options, trial) else {
            return TrialValues::excluded(iterations);
        };
        iterations += t.outcome.iterations;
        if !t.outcome.converged {
            return TrialValues::excluded(iterations);
        }
        let Ok(r) = smi_of_state(&t.channels, &t.outcome.state) else {
            return TrialValues::excluded(iterations);
        };
        total += r.smi;
        gap = gap.max((r.smi - r.smi_dual).abs());
        if options.decomposition == Decomposition::QlQr {
            checked = true;
            passed &= svd_equivalence_check(&t.outcome.state).is_ok_and(|c| c.passed);
        }
    }
    TrialValues {
        values: Some(vec![total]),
        iterations,
        dual_gap: gap,
        svd_checked: checked,
        svd_passed: passed,
    }
}

/// Seed of the `g`-th independent relay pair; pair 0 keeps the base seed.
fn group_seed(seed: u64, g: usize) -> u64 {
    seed.wrapping_add((g as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn ber_trial(config: &SystemConfig, options: &QlqrOptions, trial: u64, uses: usize) -> TrialValues {
    let Some(t) = optimize_trial(config, options, trial) else {
        return TrialValues::excluded(0);
    };
    let iterations = t.outcome.iterations;
    if !t.outcome.converged {
        return TrialValues::excluded(iterations);
    }
    let svd_opts = QlqrOptions {
        decomposition: Decomposition::Svd,
        ..*options
    };
    let baseline = match run_qlqr(&t.channels, config, &svd_opts) {
        Ok(o) if o.converged => o,
        _ => return TrialValues::excluded(iterations),
    };
    let mut rates = Vec::with_capacity(2);
    for state in [&t.outcome.state, &baseline.state] {
        // Both designs see the same bits and the same noise samples.
        let mut sym = stream_rng(config.seed, trial, Purpose::Symbols, t.attempt);
        let mut noise = stream_rng(config.seed, trial, Purpose::Noise, t.attempt);
        match count_bit_errors(&t.channels, state, uses, &mut sym, &mut noise) {
            Ok(c) => rates.push(c.rate()),
            Err(_) => return TrialValues::excluded(iterations),
        }
    }
    let check = svd_equivalence_check(&t.outcome.state).is_ok_and(|c| c.passed);
    TrialValues {
        values: Some(rates),
        iterations,
        dual_gap: 0.0,
        svd_checked: true,
        svd_passed: check,
    }
}

pub const METRIC_SMI: &str = "smi_bits";
pub const METRIC_BER: &str = "ber";
pub const METRIC_BER_SVD: &str = "ber_svd";

/// Runs every sweep point; trials run in parallel and are reduced in index
/// order, so results do not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, SimError> {
    spec.validate()?;
    let metrics: &[&str] = match spec.kind {
        ExperimentKind::BerVsSnr => &[METRIC_BER, METRIC_BER_SVD],
        _ => &[METRIC_SMI],
    };
    let mut rows = Vec::new();
    let mut max_dual_gap: f64 = 0.0;
    let (mut svd_checks, mut svd_check_failures) = (0, 0);
    for &x in &spec.sweep {
        let config = spec.point_config(x);
        let trials: Vec<TrialValues> = (0..spec.trials as u64)
            .into_par_iter()
            .map(|trial| match spec.kind {
                ExperimentKind::SmiVsPr => smi_trial(&config, &spec.options, trial, 1),
                ExperimentKind::SmiVsRelaysStub => smi_trial(&config, &spec.options, trial, x as usize / 2),
                ExperimentKind::BerVsSnr => ber_trial(&config, &spec.options, trial, spec.symbols_per_trial),
            })
            .collect();
        let used: Vec<&Vec<f64>> = trials.iter().filter_map(|t| t.values.as_ref()).collect();
        let mean_iterations = trials.iter().map(|t| t.iterations as f64).sum::<f64>() / trials.len() as f64;
        let excluded = trials.len() - used.len();
        let flagged = excluded as f64 >= EXCLUSION_FLAG * trials.len() as f64;
        for t in &trials {
            max_dual_gap = max_dual_gap.max(t.dual_gap);
            if t.svd_checked && t.values.is_some() {
                svd_checks += 1;
                svd_check_failures += usize::from(!t.svd_passed);
            }
        }
        for (k, metric) in metrics.iter().enumerate() {
            let values: Vec<f64> = used.iter().map(|v| v[k]).collect();
            let (mean, std_err) = mean_and_se(&values);
            rows.push(PointResult {
                point: x,
                metric: metric.to_string(),
                mean,
                std_err,
                trials_converged: used.len(),
                trials_total: trials.len(),
                mean_iterations,
                flagged,
            });
        }
    }
    Ok(ExperimentResult {
        spec: spec.clone(),
        rows,
        max_dual_gap,
        svd_checks,
        svd_check_failures,
    })
}

pub fn run_smi_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, SimError> {
    if spec.kind == ExperimentKind::BerVsSnr {
        return Err(SimError::InvalidSpec("expected an SMI experiment".into()));
    }
    run_experiment(spec)
}

pub fn run_ber_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult, SimError> {
    if spec.kind != ExperimentKind::BerVsSnr {
        return Err(SimError::InvalidSpec("expected a BER experiment".into()));
    }
    run_experiment(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_error() {
        let (m, se) = mean_and_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_se(&[7.0]), (7.0, 0.0));
    }

    #[test]
    fn spec_validation() {
        let c = SystemConfig::default();
        let mut s = ExperimentSpec::new(ExperimentKind::SmiVsRelaysStub, c.clone(), vec![2.0, 3.0]);
        assert!(s.validate().is_err());
        s.sweep = vec![2.0, 4.0];
        assert!(s.validate().is_ok());
        s.trials = 0;
        assert!(s.validate().is_err());
        assert!(ExperimentSpec::new(ExperimentKind::SmiVsPr, c, vec![]).validate().is_err());
    }

    #[test]
    fn point_configs_convert_db_once() {
        let c = SystemConfig { sigma2: 2.0, ..SystemConfig::default() };
        let s = ExperimentSpec::new(ExperimentKind::BerVsSnr, c, vec![10.0]);
        let p = s.point_config(10.0);
        assert!((p.p1 - 20.0).abs() < 1e-12 && (p.p2 - 20.0).abs() < 1e-12);
        assert_eq!(p.pr, s.config.pr);
    }
}
