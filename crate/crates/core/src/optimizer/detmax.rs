use crate::linalg::{cholesky, solve, Complex64, ComplexMatrix};
use crate::model::{
    projected_weights, relay_input_covariance, BeamformerState, ChannelRealization, RelayGains, RelayPowerMode,
    SystemConfig,
};

use super::OptimizerError;

const INNER_MAX_ITERS: usize = 20_000;
const MAX_HALVINGS: usize = 50;
const OUTER_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelayBudget {
    Total(f64),
    PerRelay([f64; 2]),
}

/// Ties `Ξ` to the gains: `Ĉ(f) = σ²(ρ² Σᵢ Aᵢ diag(fᵢ²) Aᵢᴴ + G)`.
#[derive(Debug, Clone)]
pub struct NoiseCoupling {
    pub a: [ComplexMatrix; 2],
    pub receive_gram: ComplexMatrix,
    pub sigma2: f64,
}

/// `max ∏ₖ(ς_k ξ_k)²` over center gains, `ς_k = ρ Σᵢ l_{ik} f_{ik} r_{ik}`,
/// subject to `Σ_{ik} g_{ik} f_{ik}² ≤ P_R` (or per relay).
///
/// With `coupling = None` the `ξ_k` are frozen and drop out of the argmax.
#[derive(Debug, Clone)]
pub struct DetMaxProblem {
    pub l_diag: [Vec<f64>; 2],
    pub r_diag: [Vec<f64>; 2],
    /// Power weights `g_{ik} = (F_R D_i F_Rᴴ)_{kk}`.
    pub weights: [Vec<f64>; 2],
    pub rho: f64,
    pub budget: RelayBudget,
    pub coupling: Option<NoiseCoupling>,
    pub outer_rounds: usize,
}

#[derive(Debug, Clone)]
pub struct DetMaxSolution {
    pub gains: RelayGains,
    /// `ln ∏ₖ(ς_k ξ_k)²` at `gains`.
    pub objective: f64,
    pub rounds: usize,
    pub converged: bool,
}

impl DetMaxProblem {
    pub fn from_state(
        ch: &ChannelRealization,
        state: &BeamformerState,
        config: &SystemConfig,
        outer_rounds: usize,
    ) -> Result<Self, OptimizerError> {
        let factors = state.factors.as_ref().ok_or(OptimizerError::MissingFactors)?;
        let weights = [0, 1].map(|i| {
            let d = relay_input_covariance(ch, &state.v1, &state.v2, state.rho_r, state.sigma2, i);
            projected_weights(state.filters[i].f_right(), &d)
        });
        let budget = match config.relay_power {
            RelayPowerMode::Total => RelayBudget::Total(config.pr),
            RelayPowerMode::PerRelay => RelayBudget::PerRelay(config.relay_budgets()),
        };
        Ok(Self {
            l_diag: [factors.relays[0].l_diag.clone(), factors.relays[1].l_diag.clone()],
            r_diag: [factors.relays[0].r_diag.clone(), factors.relays[1].r_diag.clone()],
            weights,
            rho: state.rho_r,
            budget,
            coupling: Some(NoiseCoupling {
                a: [factors.relays[0].a.clone(), factors.relays[1].a.clone()],
                receive_gram: factors.receive_gram.clone(),
                sigma2: state.sigma2,
            }),
            outer_rounds,
        })
    }

    pub fn m(&self) -> usize {
        self.l_diag[0].len()
    }

    pub fn diagonal_products(&self, gains: &RelayGains) -> Vec<f64> {
        (0..self.m())
            .map(|k| self.rho * (0..2).map(|i| self.l_diag[i][k] * gains[i][k] * self.r_diag[i][k]).sum::<f64>())
            .collect()
    }

    pub fn noise(&self, gains: &RelayGains) -> Option<ComplexMatrix> {
        let c = self.coupling.as_ref()?;
        let m = self.m();
        let mut out = c.receive_gram.clone();
        for i in 0..2 {
            for r in 0..m {
                for s in 0..m {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..m {
                        acc += c.a[i][(r, k)] * (gains[i][k] * gains[i][k]) * c.a[i][(s, k)].conj();
                    }
                    out[(r, s)] += acc * (self.rho * self.rho);
                }
            }
        }
        Some(out.scale(c.sigma2))
    }

    /// `2 Σ ln ς_k − ln det Ĉ(f)`; the second term is omitted without coupling.
    pub fn objective(&self, gains: &RelayGains) -> f64 {
        let sig = self.diagonal_products(gains);
        if sig.iter().any(|&s| !(s > 0.0)) {
            return f64::NEG_INFINITY;
        }
        let mut t: f64 = 2.0 * sig.iter().map(|s| s.ln()).sum::<f64>();
        if let Some(c) = self.noise(gains) {
            match cholesky(&c) {
                Ok(f) => t -= f.log_det(),
                Err(_) => return f64::NEG_INFINITY,
            }
        }
        t
    }

    pub fn relay_power(&self, gains: &RelayGains) -> [f64; 2] {
        [0, 1].map(|i| (0..self.m()).map(|k| self.weights[i][k] * gains[i][k] * gains[i][k]).sum())
    }

    pub fn is_feasible(&self, gains: &RelayGains, tol: f64) -> bool {
        let p = self.relay_power(gains);
        let nonneg = gains.iter().flatten().all(|&f| f >= 0.0);
        nonneg
            && match self.budget {
                RelayBudget::Total(b) => p[0] + p[1] <= b * (1.0 + tol),
                RelayBudget::PerRelay(b) => p[0] <= b[0] * (1.0 + tol) + tol && p[1] <= b[1] * (1.0 + tol) + tol,
            }
    }

    /// Equal gains within each relay, meeting the budget with equality.
    pub fn uniform_gains(&self) -> RelayGains {
        let budgets = match self.budget {
            RelayBudget::Total(b) => [0.5 * b, 0.5 * b],
            RelayBudget::PerRelay(b) => b,
        };
        [0, 1].map(|i| {
            let total: f64 = self.weights[i].iter().sum();
            vec![(budgets[i] / total).sqrt(); self.m()]
        })
    }

    /// `∂ ln det Ĉ / ∂(f_{ik}²) = σ²ρ² a_{ik}ᴴ Ĉ⁻¹ a_{ik}` at `gains`.
    fn noise_slopes(&self, gains: &RelayGains) -> Result<[Vec<f64>; 2], OptimizerError> {
        let m = self.m();
        let Some(c) = self.coupling.as_ref() else {
            return Ok([vec![0.0; m], vec![0.0; m]]);
        };
        let chat = self.noise(gains).expect("coupled");
        let scale = c.sigma2 * self.rho * self.rho;
        let mut out = [vec![0.0; m], vec![0.0; m]];
        for i in 0..2 {
            let ci_a = solve(&chat, &c.a[i])?;
            for k in 0..m {
                let q: Complex64 = (0..m).map(|r| c.a[i][(r, k)].conj() * ci_a[(r, k)]).sum();
                out[i][k] = scale * q.re.max(0.0);
            }
        }
        Ok(out)
    }
}

/// Concave surrogate in scaled gains `u_{ik} = √g_{ik} f_{ik}`:
/// `S(u) = 2 Σ_k ln(Σᵢ c_{ik} u_{ik}) − Σ w_{ik} u_{ik}²`.
struct Surrogate<'a> {
    m: usize,
    c: &'a [f64],
    w: &'a [f64],
    radii: Radii,
}

#[derive(Clone, Copy)]
enum Radii {
    Ball(f64),
    PerRelay([f64; 2]),
}

impl Surrogate<'_> {
    fn value(&self, u: &[f64]) -> f64 {
        let m = self.m;
        let mut s = 0.0;
        for k in 0..m {
            let sig = self.c[k] * u[k] + self.c[m + k] * u[m + k];
            if !(sig > 0.0) {
                return f64::NEG_INFINITY;
            }
            s += 2.0 * sig.ln();
        }
        s - u.iter().zip(self.w).map(|(x, w)| w * x * x).sum::<f64>()
    }

    fn gradient(&self, u: &[f64], out: &mut [f64]) {
        let m = self.m;
        for k in 0..m {
            let sig = self.c[k] * u[k] + self.c[m + k] * u[m + k];
            out[k] = 2.0 * self.c[k] / sig - 2.0 * self.w[k] * u[k];
            out[m + k] = 2.0 * self.c[m + k] / sig - 2.0 * self.w[m + k] * u[m + k];
        }
    }

    /// Euclidean projection onto `{u ≥ 0} ∩ ball(s)`.
    fn project(&self, u: &mut [f64]) {
        u.iter_mut().for_each(|x| *x = x.max(0.0));
        let shrink = |part: &mut [f64], r: f64| {
            let norm = part.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > r {
                let s = if norm > 0.0 { r / norm } else { 0.0 };
                part.iter_mut().for_each(|x| *x *= s);
            }
        };
        match self.radii {
            Radii::Ball(r) => shrink(u, r),
            Radii::PerRelay(r) => {
                let (a, b) = u.split_at_mut(self.m);
                shrink(a, r[0]);
                shrink(b, r[1]);
            }
        }
    }

    /// Projected gradient ascent with spectral steps and Armijo backtracking.
    /// Returns whether the stopping test was met before the iteration cap.
    fn maximize(&self, u: &mut [f64]) -> bool {
        let n = u.len();
        self.project(u);
        let mut val = self.value(u);
        let mut grad = vec![0.0; n];
        let mut grad_new = vec![0.0; n];
        let mut trial = vec![0.0; n];
        self.gradient(u, &mut grad);
        let mut step = 1.0 / grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-300)
            * u.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
        for _ in 0..INNER_MAX_ITERS {
            let mut accepted = false;
            let mut alpha = step;
            for _ in 0..=MAX_HALVINGS {
                for j in 0..n {
                    trial[j] = u[j] + alpha * grad[j];
                }
                self.project(&mut trial);
                let lin: f64 = (0..n).map(|j| grad[j] * (trial[j] - u[j])).sum();
                let tv = self.value(&trial);
                if tv.is_finite() && tv >= val + 1e-4 * lin {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                return true;
            }
            let moved: f64 = (0..n).map(|j| (trial[j] - u[j]).powi(2)).sum::<f64>().sqrt();
            let size: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            self.gradient(&trial, &mut grad_new);
            let mut ss = 0.0;
            let mut sy = 0.0;
            for j in 0..n {
                let s = trial[j] - u[j];
                ss += s * s;
                sy += s * (grad_new[j] - grad[j]);
            }
            u.copy_from_slice(&trial);
            std::mem::swap(&mut grad, &mut grad_new);
            val = self.value(u);
            if moved <= 1e-13 * size.max(1e-300) {
                return true;
            }
            step = if sy < 0.0 { (ss / -sy).clamp(1e-12, 1e12) } else { (alpha * 2.0).min(1e12) };
        }
        false
    }
}

/// Majorize-minimize over `ln det Ĉ` around the previous gains, with the
/// concave surrogate maximized by projected gradient ascent.
pub fn solve_detmax(p: &DetMaxProblem) -> Result<DetMaxSolution, OptimizerError> {
    let m = p.m();
    for i in 0..2 {
        if p.l_diag[i].len() != m || p.r_diag[i].len() != m || p.weights[i].len() != m {
            return Err(OptimizerError::Shape("det-max vectors must share one length".into()));
        }
        if p.weights[i].iter().any(|&g| !(g > 0.0)) {
            return Err(OptimizerError::Shape("det-max power weights must be positive".into()));
        }
    }
    let sqrt_g: Vec<f64> = p.weights.iter().flatten().map(|g| g.sqrt()).collect();
    let c: Vec<f64> = (0..2)
        .flat_map(|i| (0..m).map(move |k| (i, k)))
        .map(|(i, k)| p.rho * p.l_diag[i][k] * p.r_diag[i][k] / p.weights[i][k].sqrt())
        .collect();
    let radii = match p.budget {
        RelayBudget::Total(b) => Radii::Ball(b.max(0.0).sqrt()),
        RelayBudget::PerRelay(b) => Radii::PerRelay([b[0].max(0.0).sqrt(), b[1].max(0.0).sqrt()]),
    };
    let to_gains = |u: &[f64]| -> RelayGains {
        [0, 1].map(|i| (0..m).map(|k| u[i * m + k] / sqrt_g[i * m + k]).collect())
    };

    let mut gains = p.uniform_gains();
    let mut best = p.objective(&gains);
    let rounds_cap = if p.coupling.is_some() { p.outer_rounds.max(1) } else { 1 };
    let mut converged = false;
    let mut rounds = 0;
    for _ in 0..rounds_cap {
        rounds += 1;
        let slopes = p.noise_slopes(&gains)?;
        let w: Vec<f64> = (0..2 * m).map(|j| slopes[j / m][j % m] / p.weights[j / m][j % m]).collect();
        let sur = Surrogate { m, c: &c, w: &w, radii };
        let mut u: Vec<f64> = (0..2 * m).map(|j| gains[j / m][j % m] * sqrt_g[j]).collect();
        let inner_ok = sur.maximize(&mut u);
        let candidate = to_gains(&u);
        let value = p.objective(&candidate);
        if !(value >= best) {
            converged = inner_ok;
            break;
        }
        let change = (value - best).abs();
        gains = candidate;
        let prev = best;
        best = value;
        if p.coupling.is_none() || change <= OUTER_REL_TOL * prev.abs().max(1.0) {
            converged = inner_ok;
            break;
        }
    }
    Ok(DetMaxSolution {
        gains,
        objective: best,
        rounds,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frozen(l: [Vec<f64>; 2], r: [Vec<f64>; 2], g: [Vec<f64>; 2], pr: f64) -> DetMaxProblem {
        DetMaxProblem {
            l_diag: l,
            r_diag: r,
            weights: g,
            rho: 1.0,
            budget: RelayBudget::Total(pr),
            coupling: None,
            outer_rounds: 30,
        }
    }

    #[test]
    fn scalar_matches_cauchy_schwarz() {
        let p = frozen([vec![1.5], vec![0.4]], [vec![0.8], vec![2.0]], [vec![2.0], vec![0.5]], 3.0);
        let s = solve_detmax(&p).unwrap();
        // f_i ∝ l_i r_i / g_i on the boundary.
        let dir = [1.5 * 0.8 / 2.0, 0.4 * 2.0 / 0.5];
        let norm = (2.0f64 * dir[0] * dir[0] + 0.5 * dir[1] * dir[1]).sqrt();
        let scale = 3.0f64.sqrt() / norm;
        assert!((s.gains[0][0] - dir[0] * scale).abs() < 1e-8);
        assert!((s.gains[1][0] - dir[1] * scale).abs() < 1e-8);
        assert!(s.converged);
    }

    #[test]
    fn symmetric_instance_gives_equal_relays() {
        let v = vec![1.0, 0.5];
        let p = frozen([v.clone(), v.clone()], [v.clone(), v.clone()], [vec![1.0, 2.0], vec![1.0, 2.0]], 4.0);
        let s = solve_detmax(&p).unwrap();
        for k in 0..2 {
            assert!((s.gains[0][k] - s.gains[1][k]).abs() < 1e-8);
        }
        assert!(p.is_feasible(&s.gains, 1e-8));
    }
}
