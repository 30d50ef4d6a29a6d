//! Operation-count model for the QL-QR design and three block-diagonalization
//! baselines. One FLOP is one real floating-point operation; a complex
//! multiply-add counts as 8.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

type Q = Ratio<i128>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlopError {
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("unknown primitive `{0}`")]
    UnknownPrimitive(String),
    #[error("invalid dimensions: {0}")]
    Dimensions(String),
    #[error("empty sweep")]
    EmptySweep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlopConfig {
    pub k: u64,
    pub n_i: u64,
    pub n_t: u64,
    pub n_r: u64,
}

impl FlopConfig {
    /// `K` users with `N_i` antennas each, `N_T = N_R = K·N_i`.
    pub fn new(k: u64, n_i: u64) -> Self {
        Self {
            k,
            n_i,
            n_t: k * n_i,
            n_r: k * n_i,
        }
    }

    /// The three-user, two-antenna case the printed tables refer to.
    pub fn reference() -> Self {
        Self::new(3, 2)
    }

    pub fn validate(&self) -> Result<(), FlopError> {
        if self.k == 0 || self.n_i == 0 || self.n_t == 0 || self.n_r == 0 {
            return Err(FlopError::Dimensions(format!("all sizes must be >= 1, got {self:?}")));
        }
        if self.n_t < self.n_i {
            return Err(FlopError::Dimensions(format!("n_t = {} < n_i = {}", self.n_t, self.n_i)));
        }
        Ok(())
    }
}

impl fmt::Display for FlopConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({0},{0},{0})x{1}", self.n_i, self.n_t)?;
        if self.n_t != self.k * self.n_i || self.n_r != self.n_t {
            write!(f, " k={} n_r={}", self.k, self.n_r)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Qlqr,
    Nonregenerative,
    Rbd,
    Cdbd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Qlqr, Algorithm::Nonregenerative, Algorithm::Rbd, Algorithm::Cdbd];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Qlqr => "qlqr",
            Algorithm::Nonregenerative => "nonregenerative",
            Algorithm::Rbd => "rbd",
            Algorithm::Cdbd => "cdbd",
        }
    }

    /// Total as typeset for the reference configuration.
    pub fn printed_total(self) -> u64 {
        match self {
            Algorithm::Qlqr => 33530,
            Algorithm::Nonregenerative => 45306,
            Algorithm::Rbd => 40824,
            Algorithm::Cdbd => 34638,
        }
    }

    /// Printed reduction of the QL-QR total against this algorithm, in percent.
    pub fn printed_reduction(self) -> Option<f64> {
        match self {
            Algorithm::Qlqr => None,
            Algorithm::Nonregenerative => Some(25.99),
            Algorithm::Rbd => Some(17.87),
            Algorithm::Cdbd => Some(3.20),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = FlopError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qlqr" | "ql-qr" => Ok(Algorithm::Qlqr),
            "nonregenerative" | "nonreg" => Ok(Algorithm::Nonregenerative),
            "rbd" => Ok(Algorithm::Rbd),
            "cdbd" => Ok(Algorithm::Cdbd),
            other => Err(FlopError::UnknownAlgorithm(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Primitive {
    /// `m×n · n×p`, dims `(m, n, p)`.
    Product,
    /// `m×n · n×m` with a Hermitian result, dims `(m, n)`.
    Gram,
    /// Singular values only of `m×n`, dims `(m, n)` with `n ≤ m`.
    SvdSigma,
    /// Singular values and right vectors, dims `(m, n)`.
    SvdSigmaRight,
    /// Full SVD, dims `(m, n)`.
    SvdFull,
    /// Real Gauss-Jordan inverse, dims `(m,)`.
    RealInverse,
    /// Complex Cholesky, dims `(m,)`.
    Cholesky,
    /// QR or QL of `n×m`, dims `(n, m)` with `m ≤ n`.
    Qr,
}

impl Primitive {
    fn arity(self) -> usize {
        match self {
            Primitive::Product => 3,
            Primitive::RealInverse | Primitive::Cholesky => 1,
            _ => 2,
        }
    }
}

impl FromStr for Primitive {
    type Err = FlopError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "product" => Primitive::Product,
            "gram" => Primitive::Gram,
            "svd_sigma" => Primitive::SvdSigma,
            "svd_sigma_right" => Primitive::SvdSigmaRight,
            "svd_full" => Primitive::SvdFull,
            "real_inverse" => Primitive::RealInverse,
            "cholesky" => Primitive::Cholesky,
            "qr" | "ql" => Primitive::Qr,
            other => return Err(FlopError::UnknownPrimitive(other.to_string())),
        })
    }
}

fn q(x: u64) -> Q {
    Q::from_integer(i128::from(x))
}

fn frac(n: i128, d: i128) -> Q {
    Q::new(n, d)
}

/// Rounds half-up to an integer; negative values are rejected upstream.
fn round_half_up(x: Q) -> u64 {
    let r = (x + frac(1, 2)).floor().to_integer();
    u64::try_from(r).expect("flop counts are non-negative")
}

pub fn primitive_flops(kind: Primitive, dims: &[u64]) -> Result<u64, FlopError> {
    if dims.len() != kind.arity() {
        return Err(FlopError::Dimensions(format!("{kind:?} takes {} sizes, got {}", kind.arity(), dims.len())));
    }
    if dims.contains(&0) {
        return Err(FlopError::Dimensions("sizes must be positive".into()));
    }
    let d: Vec<Q> = dims.iter().map(|&x| q(x)).collect();
    let v = match kind {
        Primitive::Product => {
            let (m, n, p) = (d[0], d[1], d[2]);
            q(8) * m * n * p - q(2) * m * p
        }
        Primitive::Gram => {
            let (m, n) = (d[0], d[1]);
            q(4) * n * m * (m + q(1))
        }
        Primitive::SvdSigma => {
            if dims[1] > dims[0] {
                return Err(FlopError::Dimensions(format!("svd_sigma needs n <= m, got {dims:?}")));
            }
            let (m, n) = (d[0], d[1]);
            q(32) * (m * n * n - n * n * n / q(3))
        }
        Primitive::SvdSigmaRight => {
            let (m, n) = (d[0], d[1]);
            q(32) * (n * m * m + q(2) * m * m * m)
        }
        Primitive::SvdFull => {
            let (m, n) = (d[0], d[1]);
            q(8) * (q(4) * n * n * m + q(8) * n * m * m + q(9) * m * m * m)
        }
        Primitive::RealInverse => {
            let m = d[0];
            q(2) * m * m * m - q(2) * m * m + m
        }
        Primitive::Cholesky => {
            let m = d[0];
            q(8) * m * m * m / q(3)
        }
        Primitive::Qr => {
            if dims[1] > dims[0] {
                return Err(FlopError::Dimensions(format!("qr needs m <= n, got {dims:?}")));
            }
            let (n, m) = (d[0], d[1]);
            q(16) * (n * n * m - n * m * m + m * m * m / q(3))
        }
    };
    Ok(round_half_up(v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopStep {
    pub label: String,
    pub flops: u64,
    /// Typeset value, known only for the reference configuration.
    pub printed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub label: String,
    pub printed: u64,
    pub evaluated: u64,
    pub delta: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopReport {
    pub algorithm: Algorithm,
    pub config: FlopConfig,
    pub steps: Vec<FlopStep>,
    pub total: u64,
    pub notes: Vec<String>,
}

impl FlopReport {
    pub fn discrepancies(&self) -> Vec<Discrepancy> {
        self.steps
            .iter()
            .filter_map(|s| {
                let p = s.printed?;
                (p != s.flops).then(|| Discrepancy {
                    label: s.label.clone(),
                    printed: p,
                    evaluated: s.flops,
                    delta: s.flops as i64 - p as i64,
                })
            })
            .collect()
    }

    /// `(total − printed) / printed` when the configuration is the reference one.
    pub fn total_deviation(&self) -> Option<f64> {
        (self.config == FlopConfig::reference()).then(|| {
            let p = self.algorithm.printed_total() as f64;
            (self.total as f64 - p) / p
        })
    }
}

/// Percentage by which `ours` undercuts `theirs`.
pub fn reduction_percent(ours: u64, theirs: u64) -> f64 {
    100.0 * (theirs as f64 - ours as f64) / theirs as f64
}

struct Vars {
    k: Q,
    ni: Q,
    nt: Q,
    nr: Q,
    nb: Q,
}

fn step_values(alg: Algorithm, c: &FlopConfig) -> Vec<(&'static str, Q, u64)> {
    let Vars { k, ni, nt, nr, nb } = Vars {
        k: q(c.k),
        ni: q(c.n_i),
        nt: q(c.n_t),
        nr: q(c.n_r),
        nb: q(c.n_t - c.n_i),
    };
    let n = |x: i128| Q::from_integer(x);
    match alg {
        Algorithm::Qlqr => {
            let qr = n(2) * n(16) * k * (nt * nt * ni - nt * ni * ni + ni * ni * ni / n(3));
            let relay = n(8) * nt * nt * ni + n(4) * nt * ni * ni + n(2) * nt * ni;
            vec![
                ("V1, V2", n(2) * k * (n(40) * ni * ni * ni - n(24) * ni * ni + n(17) * ni), 1560),
                ("QL of H V (Q_L L)", qr, 4864),
                ("QR of H V (Q_R R)", qr, 4864),
                ("H^T F H relay 1", relay, 696),
                ("H^T F H relay 2", relay, 696),
                (
                    "C1 hat",
                    n(2) * k * (n(32) * nt * nt * ni + n(8) * nt * ni + n(2) * nt * nt - n(4) * ni + n(3) * nt),
                    14856,
                ),
                ("(Xi^H Xi)^-1", k * (frac(14, 3) * nt * nt * nt - n(2) * nt * nt + nt), 2826),
                ("det B^2", n(4) * k * (nt * nt * nt + nt * nt + n(2) * nt), 3168),
            ]
        }
        Algorithm::Nonregenerative => {
            let svd = n(8) * k * (n(4) * nt * nt * ni + n(8) * nt * ni * ni + n(9) * ni * ni * ni);
            let gram = n(4) * k * ni * nt * (ni + n(1));
            vec![
                ("U^a Sigma^a Lambda^a_i", svd, 13248),
                ("U^a_j Sigma^a_j Lambda^a_j", svd, 13248),
                ("H_i^H H_i", gram, 432),
                ("H_j^H H_j", gram, 432),
                (
                    "H^H [...]^-1 H",
                    n(2) * k
                        * (ni * ni * ni + n(8) * ni * nt * nt + n(4) * ni * ni * nt + n(2) * ni * nt - ni * ni + ni),
                    4212,
                ),
                (
                    "V_A Lambda_A V_A^H",
                    n(8) * k * (n(4) * nt * nt * ni + n(8) * nt * ni * ni + n(9) * ni * ni * ni + ni / n(2)),
                    13272,
                ),
                (
                    "diag(G tilde)",
                    k * (n(4) * ni * nt * (ni + n(1)) + n(2) * ni * ni * ni - n(2) * ni * ni + ni),
                    462,
                ),
            ]
        }
        Algorithm::Rbd => vec![
            ("U^a Sigma^a Lambda^a", n(32) * k * (nt * nb * nb + n(2) * nb * nb * nb), 21504),
            ("(Sigma^T Sigma + rho^2 I)^-1/2", k * (n(18) * nt * ni * ni - n(2) * ni * ni), 336),
            ("V^a D^a", n(8) * k * nt * nt * nt, 5184),
            ("H P^a", k * (n(8) * nt * ni * ni - n(2) * ni * ni), 552),
            (
                "U^b Sigma^b V^b",
                n(64) * k * (frac(9, 8) * ni * ni * ni + nt * ni * ni + nt * nt * ni / n(2)),
                13248,
            ),
        ],
        Algorithm::Cdbd => {
            let svd = n(8) * k * (n(4) * nt * nt * ni + n(8) * nt * ni * ni + n(9) * ni * ni * ni);
            vec![
                ("U Sigma Lambda (i,1)", svd, 13248),
                ("U Sigma Lambda (i,2)", svd, 13248),
                (
                    "H W H",
                    k * (n(8) * ni * nt * nt - n(2) * ni * nt + n(4) * ni * nt * (ni + n(1))),
                    2088,
                ),
                (
                    "L^H L",
                    n(2) * k * (ni + n(2) * nt * ni * (ni + n(1)) + frac(4, 3) * ni * ni * ni),
                    508,
                ),
                (
                    "H_mse pseudo-inverse",
                    frac(4, 3) * nr * nr * nr + n(12) * nr * nr * nt - n(2) * nr * nr - n(2) * nt * nr,
                    2736,
                ),
                (
                    "H V^a V^b",
                    n(8) * k * (n(4) * nt * ni * ni - frac(4, 3) * ni * ni * ni + ni * ni * (ni + n(1))),
                    2336,
                ),
                (
                    "(Q Q^H + sigma^2 Psi)^-1",
                    k * (n(4) * nr * ni * (ni + n(1)) + n(3) * ni + n(2) * ni * ni * ni - n(2) * ni * ni),
                    474,
                ),
            ]
        }
    }
}

/// Per-step counts with every step evaluated as typeset.
pub fn table_flops(algorithm: Algorithm, config: &FlopConfig) -> Result<FlopReport, FlopError> {
    config.validate()?;
    let reference = *config == FlopConfig::reference();
    let mut steps = Vec::new();
    for (label, value, printed) in step_values(algorithm, config) {
        if value < Q::from_integer(0) {
            return Err(FlopError::Dimensions(format!("step `{label}` is negative for {config}")));
        }
        steps.push(FlopStep {
            label: label.to_string(),
            flops: round_half_up(value),
            printed: reference.then_some(printed),
        });
    }
    let total = steps.iter().map(|s| s.flops).sum();
    let mut notes = Vec::new();
    if algorithm == Algorithm::Cdbd {
        notes.push("step `H_mse pseudo-inverse` has no K factor; evaluated as printed".to_string());
    }
    Ok(FlopReport {
        algorithm,
        config: *config,
        steps,
        total,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Vary `K` at fixed `N_i`.
    Users { n_i: u64, ks: Vec<u64> },
    /// Vary `N_i` at fixed `K`.
    Antennas { k: u64, n_is: Vec<u64> },
}

impl Sweep {
    pub fn configs(&self) -> Vec<FlopConfig> {
        match self {
            Sweep::Users { n_i, ks } => ks.iter().map(|&k| FlopConfig::new(k, *n_i)).collect(),
            Sweep::Antennas { k, n_is } => n_is.iter().map(|&n| FlopConfig::new(*k, n)).collect(),
        }
    }
}

/// One report per (point, algorithm), points in sweep order.
pub fn complexity_sweep(algorithms: &[Algorithm], sweep: &Sweep) -> Result<Vec<FlopReport>, FlopError> {
    let configs = sweep.configs();
    if configs.is_empty() || algorithms.is_empty() {
        return Err(FlopError::EmptySweep);
    }
    let mut out = Vec::with_capacity(configs.len() * algorithms.len());
    for c in &configs {
        for &a in algorithms {
            out.push(table_flops(a, c)?);
        }
    }
    Ok(out)
}

pub const CSV_HEADER: &str = "algorithm,k,n_i,n_t,step_label,flops,total";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per step plus a `TOTAL` row for each report.
pub fn to_csv(reports: &[FlopReport]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let c = &r.config;
        for s in &r.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.algorithm, c.k, c.n_i, c.n_t, csv_field(&s.label), s.flops, r.total
            );
        }
        let _ = writeln!(out, "{},{},{},{},TOTAL,{},{}", r.algorithm, c.k, c.n_i, c.n_t, r.total, r.total);
    }
    out
}
