use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const MINIMAL: &str = r#"
schema_version = 1
T_grid = [32, 64, 128]
trials_per_T = 4
theta_grid = [0.0, 1.0]
base_seed = 3

[problem]
d = 3
mu = 1.0
L = 2.0
Q = 1.0
feasible = { kind = "ball", radius = 1.0 }

[schedule]
kind = "thm1"
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_sgd-rates"));
    c.env_remove("SGD_RATES_JOBS");
    c
}

fn exec(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

#[test]
fn run_writes_one_row_per_t_and_theta() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("res/min.csv");
    let o = exec(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "T,theta,empirical_quantile,bound_quantile,exceedance_frac,exp_neg_theta,median_gap,mean_gap,violation"
    );
    assert_eq!(lines.count(), 3 * 2);

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["trials_per_T"], 4);
    assert_eq!(summary["config"]["schema_version"], 1);
    assert_eq!(summary["seeds"]["base_seed"], 3);
    assert!(summary["fitted_slope"].is_number());
}

#[test]
fn csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(code(&exec(&["run", cfg.to_str().unwrap(), "--out", a.to_str().unwrap(), "--jobs", "1"])), 0);
    let o = bin().args(["run", cfg.to_str().unwrap(), "--out", b.to_str().unwrap()]).env("SGD_RATES_JOBS", "3").output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn override_and_seed_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    let out = dir.path().join("o.csv");
    let o = exec(&[
        "run",
        cfg.to_str().unwrap(),
        "--override",
        "trials_per_T=1",
        "--seed",
        "99",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["trials_per_T"], 1);
    assert_eq!(summary["config"]["base_seed"], 99);
    assert_eq!(summary["config"]["T_grid"], serde_json::json!([32, 64, 128]));
}

#[test]
fn invalid_schedule_kind_exits_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &MINIMAL.replace("\"thm1\"", "\"thm9\""));
    let o = exec(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("thm9") && err.contains("kind") && err.contains("line"), "{err}");
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", &MINIMAL.replace("[32, 64, 128]", "[64, 32]"));
    assert_eq!(code(&exec(&["run", cfg.to_str().unwrap()])), 2);
    let cfg = write(dir.path(), "mu.toml", &MINIMAL.replace("mu = 1.0", "mu = 3.0"));
    assert_eq!(code(&exec(&["run", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&exec(&["run", "/nonexistent/x.toml"])), 2);
    assert_eq!(code(&exec(&["frobnicate"])), 2);
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    // the output path is a directory
    let o = exec(&["run", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn verify_exit_codes() {
    assert_eq!(code(&exec(&["verify", "thm1", "--T", "1000", "--kappa", "8"])), 0);
    assert_eq!(code(&exec(&["verify", "prop_original", "--T", "1000", "--kappa", "8"])), 0);
    assert_eq!(code(&exec(&["verify", "thm1", "--T", "1000", "--kappa", "8", "--corrupt", "r_hat=0.01"])), 3);
    assert_eq!(code(&exec(&["verify", "thm1", "--T", "10", "--kappa", "0.5"])), 2);
}

#[test]
fn verify_writes_verdict_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("v.csv");
    let o = exec(&["verify", "thm1", "--T", "50", "--kappa", "4", "--out", out.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("min_slack"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), "condition_id,t,lhs,rhs,pass,slack");
    // seven conditions per t plus the terminal check
    assert_eq!(text.lines().count(), 1 + 7 * 50 + 1);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["seed"], 5);
}

/// The thm2 recursion sequences as stated violate condition 4;
/// the checker has to report that rather than mask it.
#[test]
fn verify_reports_thm2_condition_four() {
    let o = exec(&["verify", "thm2", "--T", "10", "--kappa", "2"]);
    assert_eq!(code(&o), 3);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let row = stdout.lines().find(|l| l.split_whitespace().next() == Some("4")).unwrap();
    assert_eq!(row.split_whitespace().nth(1), Some("9"), "{stdout}");
}

#[test]
fn tailcheck_gaussian_self_test_passes() {
    let o = exec(&["tailcheck", "--gaussian", "--draws", "200000"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn tailcheck_needs_100_trials() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "min.toml", MINIMAL);
    assert_eq!(code(&exec(&["tailcheck", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&exec(&["tailcheck", cfg.to_str().unwrap(), "--trials", "99"])), 2);
}

#[test]
fn tailcheck_on_an_optimizer_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", &MINIMAL.replace("trials_per_T = 4", "trials_per_T = 100"));
    let out = dir.path().join("tail.csv");
    let o = exec(&["tailcheck", cfg.to_str().unwrap(), "--override", "T_grid=[200]", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 2);
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        let cfg = sgd_rates::config::load_config(&path, &[]).unwrap();
        let exp: sgd_rates::harness::ExperimentConfig = cfg.into();
        exp.build().unwrap();
    }
}
