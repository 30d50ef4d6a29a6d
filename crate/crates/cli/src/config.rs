//! Flat `key = value` configuration files and the resolved run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use qlqr_core::complexity::{Algorithm, FlopConfig};
use qlqr_core::model::{Decomposition, RelayPowerMode, SystemConfig};
use qlqr_core::optimizer::QlqrOptions;
use qlqr_core::simulator::db_to_linear;
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Optimize,
    Smi,
    Ber,
    Flops,
    Sweep,
    Selftest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    K,
    NI,
}

/// Powers as given, before conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowersDb {
    pub p1: f64,
    pub p2: f64,
    pub pr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub powers_db: PowersDb,
    /// Linear powers, converted once from `powers_db`.
    pub system: SystemConfig,
    pub options: QlqrOptions,
    pub trials: usize,
    pub symbols_per_trial: usize,
    /// SMI: relay powers in dB. BER: per-source SNR in dB.
    pub sweep_db: Vec<f64>,
    /// Non-empty selects the relay-count SMI experiment.
    pub relay_counts: Vec<u64>,
    pub flops_case: FlopConfig,
    pub all_algorithms: bool,
    pub algorithm: Algorithm,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: CommandKind,
    pub config_path: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed_override: Option<u64>,
    pub verbosity: u8,
    pub settings: Settings,
}

/// Raw values keyed by field name; later layers override earlier ones.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

pub const KEYS: &[&str] = &[
    "m",
    "n",
    "p1_db",
    "p2_db",
    "pr_db",
    "a",
    "sigma2",
    "seed",
    "relay_power",
    "trials",
    "symbols_per_trial",
    "tol",
    "max_iters",
    "detmax_outer_rounds",
    "balance_tol",
    "decomposition",
    "sweep",
    "relays",
    "case",
    "all",
    "algorithm",
    "over",
    "values",
];

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut out = Self::default();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(format!("line {}: expected `key = value`", no + 1));
            };
            let key = k.trim().replace('-', "_");
            let key = if key == "symbols" { "symbols_per_trial".to_string() } else { key };
            if !KEYS.contains(&key.as_str()) {
                return err(format!("line {}: unknown key `{}`", no + 1, k.trim()));
            }
            out.values.insert(key, v.trim().to_string());
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        debug_assert!(KEYS.contains(&key), "{key}");
        self.values.insert(key.to_string(), value.to_string());
    }

    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError(format!("bad value for `{key}`: `{v}`"))),
        }
    }

    fn list<T: std::str::FromStr + Clone>(&self, key: &str, default: &[T]) -> Result<Vec<T>, ConfigError> {
        match self.values.get(key) {
            None => Ok(default.to_vec()),
            Some(v) if v.trim().is_empty() => Ok(Vec::new()),
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse().map_err(|_| ConfigError(format!("bad entry `{x}` in `{key}`"))))
                .collect(),
        }
    }

    /// Resolves into settings; `command` picks the default sweep.
    pub fn resolve(&self, command: CommandKind) -> Result<Settings, ConfigError> {
        let powers_db = PowersDb {
            p1: self.get("p1_db", 10.0)?,
            p2: self.get("p2_db", 10.0)?,
            pr: self.get("pr_db", 10.0)?,
        };
        let relay_power = match self.get::<String>("relay_power", "total".into())?.as_str() {
            "total" => RelayPowerMode::Total,
            "per_relay" => RelayPowerMode::PerRelay,
            other => return err(format!("relay_power must be total or per_relay, got `{other}`")),
        };
        let decomposition = match self.get::<String>("decomposition", "ql_qr".into())?.as_str() {
            "ql_qr" | "qlqr" => Decomposition::QlQr,
            "svd" => Decomposition::Svd,
            other => return err(format!("decomposition must be ql_qr or svd, got `{other}`")),
        };
        let system = SystemConfig {
            m: self.get("m", 2)?,
            n: self.get("n", 2)?,
            p1: db_to_linear(powers_db.p1),
            p2: db_to_linear(powers_db.p2),
            pr: db_to_linear(powers_db.pr),
            a: self.get("a", 0.5)?,
            sigma2: self.get("sigma2", 1.0)?,
            seed: self.get("seed", 0)?,
            relay_power,
        };
        system.validate().map_err(|e| ConfigError(e.to_string()))?;
        let defaults = QlqrOptions::default();
        let options = QlqrOptions {
            tol: self.get("tol", defaults.tol)?,
            max_iters: self.get("max_iters", defaults.max_iters)?,
            detmax_outer_rounds: self.get("detmax_outer_rounds", defaults.detmax_outer_rounds)?,
            balance_tol: self.get("balance_tol", defaults.balance_tol)?,
            decomposition,
        };
        if !(options.tol > 0.0) || options.max_iters == 0 || !(options.balance_tol >= 0.0) {
            return err("tol must be > 0, max_iters >= 1, balance_tol >= 0");
        }
        let default_sweep: &[f64] = match command {
            CommandKind::Ber => &[0.0, 5.0, 10.0, 15.0],
            _ => &[0.0, 10.0, 20.0],
        };
        let flops_case = match self.values.get("case") {
            None => FlopConfig::reference(),
            Some(c) => parse_case(c)?,
        };
        let sweep_axis = match self.get::<String>("over", "k".into())?.as_str() {
            "k" => SweepAxis::K,
            "n_i" | "ni" => SweepAxis::NI,
            other => return err(format!("over must be k or n_i, got `{other}`")),
        };
        let settings = Settings {
            powers_db,
            system,
            options,
            trials: self.get("trials", 1000)?,
            symbols_per_trial: self.get("symbols_per_trial", 10_000)?,
            sweep_db: self.list("sweep", default_sweep)?,
            relay_counts: self.list("relays", &[])?,
            flops_case,
            all_algorithms: self.get("all", false)?,
            algorithm: self
                .get::<String>("algorithm", "qlqr".into())?
                .parse()
                .map_err(|e: qlqr_core::complexity::FlopError| ConfigError(e.to_string()))?,
            sweep_axis,
            sweep_values: self.list("values", &[2, 3, 4])?,
        };
        if settings.trials == 0 {
            return err("trials must be >= 1");
        }
        Ok(settings)
    }
}

/// `"2,2,2x6"`: per-user antenna counts and the total, e.g. three users with two
/// antennas each and `N_T = 6`. Users must be uniform.
pub fn parse_case(s: &str) -> Result<FlopConfig, ConfigError> {
    let s = s.trim().trim_start_matches('(');
    let Some((users, total)) = s.split_once(['x', 'X']) else {
        return err(format!("case `{s}` must look like 2,2,2x6"));
    };
    let users: Vec<u64> = users
        .trim_end_matches(')')
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| ConfigError(format!("bad antenna count `{x}`"))))
        .collect::<Result<_, _>>()?;
    let n_t: u64 = total.trim().parse().map_err(|_| ConfigError(format!("bad total `{total}`")))?;
    if users.is_empty() || users.iter().any(|&u| u != users[0]) || users[0] == 0 {
        return err("per-user antenna counts must be equal and positive");
    }
    if users.iter().sum::<u64>() != n_t {
        return err(format!("antenna counts {users:?} do not sum to {n_t}"));
    }
    Ok(FlopConfig::new(users.len() as u64, users[0]))
}
