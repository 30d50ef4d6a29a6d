use std::fs;
use std::path::Path;
use std::process::Command;

use qlqr_cli::{parse_manifest, Metadata, EXIT_INVALID, EXIT_OK};

fn qlqr(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_qlqr")).args(args).output().unwrap()
}

fn out_arg(dir: &Path) -> String {
    dir.to_str().unwrap().to_string()
}

#[test]
fn flops_csv_carries_the_totals() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlqr(&["--out", &out_arg(dir.path()), "flops", "--all"]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let csv = fs::read_to_string(dir.path().join("flops.csv")).unwrap();
    assert!(csv.starts_with("algorithm,k,n_i,n_t,step_label,flops,total\n"));
    for (alg, total) in [("qlqr", 33554), ("nonregenerative", 45306), ("rbd", 41760), ("cdbd", 34638)] {
        let row = format!("{alg},3,2,6,TOTAL,{total},{total}");
        assert!(csv.lines().any(|l| l == row), "missing {row}");
    }
}

#[test]
fn sweep_over_users_writes_one_total_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlqr(&["--out", &out_arg(dir.path()), "sweep", "--over", "k", "--values", "2,3,4"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("flops.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.contains(",TOTAL,")).count(), 3 * 4);
}

#[test]
fn optimize_balances_the_two_links() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlqr(&["--m", "1", "--n", "2", "--p1-db", "10", "--p2-db", "10", "--pr-db", "10", "--seed", "7", "--out", &out_arg(dir.path()), "optimize"]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    let csv = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    let last: Vec<f64> = csv.lines().last().unwrap().split(',').skip(1).map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - last[1]).abs() <= 1e-3 * last[0].max(last[1]));
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qlqr(&["--out", &out_arg(dir.path()), "selftest"]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn metadata_round_trips_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_arg(dir.path());
    let args = ["qlqr", "--m", "1", "--n", "2", "--trials", "3", "--sweep", "0,10", "--seed", "4", "--out", &out, "smi"];
    let o = qlqr(&args[1..]);
    assert_eq!(o.status.code(), Some(EXIT_OK), "{}", String::from_utf8_lossy(&o.stderr));
    let meta: Metadata = serde_json::from_str(&fs::read_to_string(dir.path().join("results.meta.json")).unwrap()).unwrap();
    assert_eq!(meta.manifest, parse_manifest(args).unwrap());
    assert_eq!(meta.seed, 4);
    let exp = meta.experiment.unwrap();
    assert_eq!(exp.trials, 3);
    assert_eq!(exp.config.m, 1);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nm = 1\nn = 2\ntrials = 2\nseed = 9\nsweep = 0\n").unwrap();
    let out = out_arg(dir.path());
    let m = parse_manifest(["qlqr", "--config", cfg.to_str().unwrap(), "--seed", "11", "--out", &out, "smi"]).unwrap();
    assert_eq!(m.settings.system.m, 1);
    assert_eq!(m.settings.system.seed, 11);
    assert_eq!(m.settings.trials, 2);
}

#[test]
fn reruns_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [&a, &b] {
        let o = qlqr(&["--trials", "4", "--symbols", "200", "--sweep", "0,10", "--seed", "2", "--out", &out_arg(d.path()), "ber"]);
        assert_eq!(o.status.code(), Some(EXIT_OK));
    }
    let read = |d: &tempfile::TempDir| fs::read(d.path().join("results.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn bad_input_exits_with_code_one() {
    assert_eq!(qlqr(&["--no-such-flag", "flops"]).status.code(), Some(EXIT_INVALID));
    assert_eq!(qlqr(&["--m", "0", "optimize"]).status.code(), Some(EXIT_INVALID));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "bogus_key = 3\n").unwrap();
    let o = qlqr(&["--config", cfg.to_str().unwrap(), "--out", &out_arg(dir.path()), "flops"]);
    assert_eq!(o.status.code(), Some(EXIT_INVALID));

    // A regular file where the output directory should be.
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = qlqr(&["--out", blocker.join("sub").to_str().unwrap(), "flops"]);
    assert_eq!(o.status.code(), Some(EXIT_INVALID));
}
