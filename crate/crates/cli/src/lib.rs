//! Command-line front end: parses flags and `key = value` files, runs one
//! command and writes CSV plus JSON metadata.

pub mod config;
pub mod selftest;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Parser, Subcommand};
use qlqr_core::complexity::{complexity_sweep, reduction_percent, table_flops, to_csv, Algorithm, Sweep};
use qlqr_core::model::generate_channels;
use qlqr_core::optimizer::run_qlqr;
use qlqr_core::simulator::{
    optimize_trial, results_csv, run_experiment, ExperimentKind, ExperimentResult, ExperimentSpec,
};
use serde::{Deserialize, Serialize};

pub use config::{CommandKind, ConfigError, RawConfig, RunManifest, Settings, SweepAxis};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qlqr", version, about = "QL-QR beamforming for two-way MIMO relaying")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// `key = value` file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    n: Option<usize>,
    #[arg(long = "p1-db", global = true, allow_negative_numbers = true)]
    p1_db: Option<f64>,
    #[arg(long = "p2-db", global = true, allow_negative_numbers = true)]
    p2_db: Option<f64>,
    #[arg(long = "pr-db", global = true, allow_negative_numbers = true)]
    pr_db: Option<f64>,
    /// Relay power split for per-relay budgets.
    #[arg(long, global = true)]
    a: Option<f64>,
    #[arg(long, global = true)]
    sigma2: Option<f64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Channel uses per trial in BER runs.
    #[arg(long, global = true)]
    symbols: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long = "max-iters", global = true)]
    max_iters: Option<usize>,
    /// Sweep points in dB (comma separated).
    #[arg(long, global = true, allow_hyphen_values = true)]
    sweep: Option<String>,
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Antenna case for FLOP tables, e.g. `2,2,2x6`.
    #[arg(long, global = true)]
    case: Option<String>,
    /// All four algorithms.
    #[arg(long, global = true)]
    all: bool,
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimize one channel realization and print the MSE history.
    Optimize,
    /// Sum mutual information versus relay power (or relay count with `--relays`).
    Smi {
        /// Even relay counts, e.g. `2,4,6`.
        #[arg(long)]
        relays: Option<String>,
    },
    /// QPSK bit error rate versus SNR, QL-QR against the SVD baseline.
    Ber,
    /// Per-step FLOP tables.
    Flops {
        #[arg(long)]
        algorithm: Option<String>,
    },
    /// FLOP totals over a range of users or antennas.
    Sweep {
        /// `k` or `n_i`.
        #[arg(long)]
        over: Option<String>,
        #[arg(long)]
        values: Option<String>,
    },
    /// Runs the invariant battery.
    Selftest,
}

#[derive(Debug)]
enum RunError {
    Invalid(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Invalid(e.0)
    }
}

/// Metadata written next to every results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub manifest: RunManifest,
    pub code_version: String,
    pub seed: u64,
    pub experiment: Option<ExperimentSpec>,
    pub notes: Vec<String>,
}

fn build_manifest(cli: &Cli) -> Result<RunManifest, RunError> {
    let command = match &cli.command {
        Command::Optimize => CommandKind::Optimize,
        Command::Smi { .. } => CommandKind::Smi,
        Command::Ber => CommandKind::Ber,
        Command::Flops { .. } => CommandKind::Flops,
        Command::Sweep { .. } => CommandKind::Sweep,
        Command::Selftest => CommandKind::Selftest,
    };
    let mut raw = match &cli.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    macro_rules! flag {
        ($key:literal, $val:expr) => {
            if let Some(v) = &$val {
                raw.set($key, v);
            }
        };
    }
    flag!("m", cli.m);
    flag!("n", cli.n);
    flag!("p1_db", cli.p1_db);
    flag!("p2_db", cli.p2_db);
    flag!("pr_db", cli.pr_db);
    flag!("a", cli.a);
    flag!("sigma2", cli.sigma2);
    flag!("trials", cli.trials);
    flag!("symbols_per_trial", cli.symbols);
    flag!("seed", cli.seed);
    flag!("tol", cli.tol);
    flag!("max_iters", cli.max_iters);
    flag!("sweep", cli.sweep);
    flag!("case", cli.case);
    if cli.all {
        raw.set("all", true);
    }
    match &cli.command {
        Command::Smi { relays } => flag!("relays", relays),
        Command::Flops { algorithm } => flag!("algorithm", algorithm),
        Command::Sweep { over, values } => {
            flag!("over", over);
            flag!("values", values);
        }
        _ => {}
    }
    let settings = raw.resolve(command)?;
    Ok(RunManifest {
        command,
        config_path: cli.config.clone(),
        out_dir: cli.out.clone(),
        seed_override: cli.seed,
        verbosity: cli.verbose,
        settings,
    })
}

fn write_file(dir: &Path, name: &str, body: &str) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::Invalid(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| RunError::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn write_metadata(m: &RunManifest, experiment: Option<ExperimentSpec>, notes: Vec<String>) -> Result<(), RunError> {
    let meta = Metadata {
        manifest: m.clone(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: m.settings.system.seed,
        experiment,
        notes,
    };
    let json = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    write_file(&m.out_dir, "results.meta.json", &(json + "\n"))
}

fn db_note(m: &RunManifest) -> String {
    let p = &m.settings.powers_db;
    let s = &m.settings.system;
    format!(
        "powers converted once from dB: p1 {} dB -> {}, p2 {} dB -> {}, pr {} dB -> {}",
        p.p1, s.p1, p.p2, s.p2, p.pr, s.pr
    )
}

fn cmd_optimize(m: &RunManifest) -> Result<i32, RunError> {
    let s = &m.settings;
    let Some(t) = optimize_trial(&s.system, &s.options, 0) else {
        // Report why the last attempt failed.
        let ch = generate_channels(&s.system, 0);
        let e = run_qlqr(&ch, &s.system, &s.options).err();
        eprintln!("optimization failed: {e:?}");
        return Ok(EXIT_NUMERICAL);
    };
    let mut csv = String::from("iteration,tr_mse1,tr_mse2,sum_mse\n");
    for r in &t.outcome.history {
        let _ = writeln!(csv, "{},{:e},{:e},{:e}", r.iteration, r.tr1, r.tr2, r.sum);
        println!("iter {:3}  tr MSE1 {:.9}  tr MSE2 {:.9}  sum {:.9}", r.iteration, r.tr1, r.tr2, r.sum);
    }
    let f = t.outcome.final_report();
    let gap = (f.tr1 - f.tr2).abs() / f.tr1.max(f.tr2);
    println!(
        "converged: {}  iterations: {}  balance gap: {:.3e}",
        t.outcome.converged, t.outcome.iterations, gap
    );
    write_file(&m.out_dir, "results.csv", &csv)?;
    let mut notes = vec![db_note(m)];
    if t.attempt > 0 {
        notes.push(format!("channel redrawn {} time(s) after degenerate factors", t.attempt));
    }
    write_metadata(m, None, notes)?;
    Ok(if t.outcome.converged { EXIT_OK } else { EXIT_NUMERICAL })
}

fn experiment_spec(m: &RunManifest) -> ExperimentSpec {
    let s = &m.settings;
    let (kind, sweep) = match m.command {
        CommandKind::Ber => (ExperimentKind::BerVsSnr, s.sweep_db.clone()),
        _ if !s.relay_counts.is_empty() => (
            ExperimentKind::SmiVsRelaysStub,
            s.relay_counts.iter().map(|&z| z as f64).collect(),
        ),
        _ => (ExperimentKind::SmiVsPr, s.sweep_db.clone()),
    };
    ExperimentSpec {
        kind,
        config: s.system.clone(),
        sweep,
        trials: s.trials,
        symbols_per_trial: s.symbols_per_trial,
        options: s.options,
    }
}

fn report_experiment(r: &ExperimentResult) {
    for row in &r.rows {
        println!(
            "{:>8} {:<9} mean {:.6e} se {:.3e}  used {}/{}{}",
            row.point,
            row.metric,
            row.mean,
            row.std_err,
            row.trials_converged,
            row.trials_total,
            if row.flagged { "  FLAGGED" } else { "" }
        );
    }
}

fn cmd_experiment(m: &RunManifest) -> Result<i32, RunError> {
    let spec = experiment_spec(m);
    let result = run_experiment(&spec).map_err(|e| RunError::Invalid(e.to_string()))?;
    report_experiment(&result);
    write_file(&m.out_dir, "results.csv", &results_csv(&result))?;
    let mut notes = vec![db_note(m)];
    match spec.kind {
        ExperimentKind::BerVsSnr => notes.push(
            "SNR is P_i / sigma2 per source in dB with P_R fixed; ber_svd is the SVD-factored design on the same channels, bits and noise".into(),
        ),
        ExperimentKind::SmiVsRelaysStub => {
            notes.push("relay counts run as independent two-relay systems with SMI summed".into())
        }
        ExperimentKind::SmiVsPr => {}
    }
    if result.svd_check_failures > 0 {
        notes.push(format!("{} of {} determinant checks failed", result.svd_check_failures, result.svd_checks));
    }
    write_metadata(m, Some(spec), notes)?;
    Ok(if result.any_flagged() || result.svd_check_failures > 0 {
        EXIT_NUMERICAL
    } else {
        EXIT_OK
    })
}

fn cmd_flops(m: &RunManifest) -> Result<i32, RunError> {
    let s = &m.settings;
    let algs: Vec<Algorithm> = if s.all_algorithms { Algorithm::ALL.to_vec() } else { vec![s.algorithm] };
    let reports = algs
        .iter()
        .map(|&a| table_flops(a, &s.flops_case))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| RunError::Invalid(e.to_string()))?;
    let mut notes = Vec::new();
    for r in &reports {
        print!("{:<16} total {:>7}", r.algorithm.name(), r.total);
        if let Some(dev) = r.total_deviation() {
            print!("  printed {:>7} ({:+.2}%)", r.algorithm.printed_total(), 100.0 * dev);
        }
        println!();
        for d in r.discrepancies() {
            let line = format!(
                "{} step `{}`: printed {}, evaluated {}, delta {:+}",
                r.algorithm, d.label, d.printed, d.evaluated, d.delta
            );
            println!("  {line}");
            notes.push(line);
        }
        notes.extend(r.notes.iter().map(|n| format!("{}: {n}", r.algorithm)));
    }
    if let Some(q) = reports.iter().find(|r| r.algorithm == Algorithm::Qlqr) {
        for r in reports.iter().filter(|r| r.algorithm != Algorithm::Qlqr) {
            println!("reduction vs {:<16} {:.2}%", r.algorithm.name(), reduction_percent(q.total, r.total));
        }
    }
    write_file(&m.out_dir, "flops.csv", &to_csv(&reports))?;
    write_metadata(m, None, notes)?;
    Ok(EXIT_OK)
}

fn cmd_sweep(m: &RunManifest) -> Result<i32, RunError> {
    let s = &m.settings;
    let sweep = match s.sweep_axis {
        SweepAxis::K => Sweep::Users {
            n_i: s.flops_case.n_i,
            ks: s.sweep_values.clone(),
        },
        SweepAxis::NI => Sweep::Antennas {
            k: s.flops_case.k,
            n_is: s.sweep_values.clone(),
        },
    };
    let algs: Vec<Algorithm> = if s.all_algorithms || m.command == CommandKind::Sweep {
        Algorithm::ALL.to_vec()
    } else {
        vec![s.algorithm]
    };
    let reports = complexity_sweep(&algs, &sweep).map_err(|e| RunError::Invalid(e.to_string()))?;
    for r in &reports {
        println!("{:<16} K={} N_i={} total {}", r.algorithm.name(), r.config.k, r.config.n_i, r.total);
    }
    write_file(&m.out_dir, "flops.csv", &to_csv(&reports))?;
    write_metadata(m, None, Vec::new())?;
    Ok(EXIT_OK)
}

fn cmd_selftest(m: &RunManifest) -> Result<i32, RunError> {
    let checks = selftest::run_all();
    let mut failed = 0;
    for c in &checks {
        println!("{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    for n in selftest::printed_total_notes() {
        println!("NOTE {n}");
    }
    if m.verbosity > 0 {
        println!("{} checks, {failed} failed", checks.len());
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NUMERICAL })
}

/// Runs a manifest that has already been resolved.
pub fn run_manifest(m: &RunManifest) -> i32 {
    let r = match m.command {
        CommandKind::Optimize => cmd_optimize(m),
        CommandKind::Smi | CommandKind::Ber => cmd_experiment(m),
        CommandKind::Flops => cmd_flops(m),
        CommandKind::Sweep => cmd_sweep(m),
        CommandKind::Selftest => cmd_selftest(m),
    };
    match r {
        Ok(code) => code,
        Err(RunError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
    }
}

/// Resolves the manifest without running anything.
pub fn parse_manifest<I, T>(argv: I) -> Result<RunManifest, String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| e.to_string())?;
    build_manifest(&cli).map_err(|RunError::Invalid(m)| m)
}

pub fn parse_and_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INVALID,
            };
        }
    };
    match build_manifest(&cli) {
        Ok(m) => run_manifest(&m),
        Err(RunError::Invalid(msg)) => {
            eprintln!("error: {msg}");
            EXIT_INVALID
        }
    }
}
