use qlqr_core::model::SystemConfig;
use qlqr_core::optimizer::QlqrOptions;
use qlqr_core::rng::{stream_rng, Purpose};
use qlqr_core::simulator::{
    count_bit_errors, optimize_trial, results_csv, run_experiment, ExperimentKind, ExperimentSpec, METRIC_BER,
    METRIC_SMI, RESULTS_HEADER,
};

fn design(p: f64) -> (qlqr_core::simulator::OptimizedTrial, SystemConfig) {
    let cfg = SystemConfig { p1: p, p2: p, pr: p, seed: 5, ..SystemConfig::default() };
    (optimize_trial(&cfg, &QlqrOptions::default(), 0).unwrap(), cfg)
}

fn ber(t: &qlqr_core::simulator::OptimizedTrial, sigma2: f64, uses: usize) -> f64 {
    let mut st = t.outcome.state.clone();
    st.sigma2 = sigma2;
    let mut s = stream_rng(1, 0, Purpose::Symbols, 0);
    let mut n = stream_rng(1, 0, Purpose::Noise, 0);
    count_bit_errors(&t.channels, &st, uses, &mut s, &mut n).unwrap().rate()
}

#[test]
fn noiseless_link_decodes_every_bit() {
    let (t, _) = design(1000.0);
    assert_eq!(ber(&t, 0.0, 2000), 0.0);
}

#[test]
fn overwhelming_noise_gives_coin_flips() {
    let (t, _) = design(10.0);
    let r = ber(&t, 1e8, 10_000);
    assert!((r - 0.5).abs() < 0.02, "{r}");
}

#[test]
fn bit_counts_are_reproducible() {
    let (t, _) = design(10.0);
    assert_eq!(ber(&t, 1.0, 1000), ber(&t, 1.0, 1000));
}

fn ber_spec(symbols: usize) -> ExperimentSpec {
    let cfg = SystemConfig { seed: 3, ..SystemConfig::default() };
    let mut spec = ExperimentSpec::new(ExperimentKind::BerVsSnr, cfg, vec![5.0]);
    spec.trials = 40;
    spec.symbols_per_trial = symbols;
    spec
}

#[test]
fn doubling_symbols_leaves_ber_within_noise() {
    let a = run_experiment(&ber_spec(2000)).unwrap();
    let b = run_experiment(&ber_spec(4000)).unwrap();
    let (x, y) = (a.row(5.0, METRIC_BER).unwrap(), b.row(5.0, METRIC_BER).unwrap());
    let se = (x.std_err.powi(2) + y.std_err.powi(2)).sqrt();
    assert!((x.mean - y.mean).abs() < 3.0 * se, "{} vs {} (se {se})", x.mean, y.mean);
}

#[test]
fn smi_sweep_is_negative_and_consistent() {
    let cfg = SystemConfig { m: 1, n: 2, seed: 11, ..SystemConfig::default() };
    let mut spec = ExperimentSpec::new(ExperimentKind::SmiVsPr, cfg, vec![0.0, 20.0]);
    spec.trials = 30;
    let r = run_experiment(&spec).unwrap();
    let lo = r.row(0.0, METRIC_SMI).unwrap();
    let hi = r.row(20.0, METRIC_SMI).unwrap();
    assert!(lo.mean < 0.0 && hi.mean < lo.mean);
    assert_eq!(lo.trials_total, 30);
    assert!(r.max_dual_gap < 1e-8, "{}", r.max_dual_gap);
    assert_eq!(r.svd_check_failures, 0);
    let csv = results_csv(&r);
    assert!(csv.starts_with(RESULTS_HEADER));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn relay_count_stub_sums_independent_pairs() {
    let cfg = SystemConfig { m: 1, n: 2, seed: 2, ..SystemConfig::default() };
    let mut spec = ExperimentSpec::new(ExperimentKind::SmiVsRelaysStub, cfg, vec![2.0, 4.0]);
    spec.trials = 20;
    let r = run_experiment(&spec).unwrap();
    let two = r.row(2.0, METRIC_SMI).unwrap().mean;
    let four = r.row(4.0, METRIC_SMI).unwrap().mean;
    assert!(four < two);
}

#[test]
fn invalid_specs_are_rejected() {
    let mut spec = ber_spec(100);
    spec.trials = 0;
    assert!(run_experiment(&spec).is_err());
    let mut spec = ber_spec(100);
    spec.sweep.clear();
    assert!(run_experiment(&spec).is_err());
}
