//! Command-line front end.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 parse or validation failure,
//! 3 a recursion condition or tail test failed.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::bounds::BoundSource;
use crate::config::{load_config, parse_override, ConfigError, ConfigFile};
use crate::error::Error;
use crate::harness::{result_table, run_sweep, ComparisonRow, ExperimentConfig, SEED_STRIDE};
use crate::verify::{
    build_sequences, check_conditions, exceedance_table, mc_tail_check, sample_tail, summarize, terminal_check,
    ExceedanceRow, Sequence, TailDistribution, TailRunner, Verdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;

/// Minimum trial count accepted by `tailcheck`.
pub const MIN_TAIL_TRIALS: usize = 100;

#[derive(Debug, Parser)]
#[command(name = "sgd-rates", version, about = "SGD rate experiments, bound evaluation and proof-condition checks")]
pub struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "SGD_RATES_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep T, write per-(T, θ) CSV plus a JSON summary
    Run(RunArgs),
    /// Check the seven recursion inequalities for one bound
    Verify(VerifyArgs),
    /// Binomial exceedance tests of the tail bounds
    Tailcheck(TailArgs),
}

#[derive(Debug, Args)]
pub struct RunArgs {
    pub config: PathBuf,
    /// `key=value`, dotted keys reach nested tables (repeatable)
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// thm1, prop_original, prop_interior or thm2
    pub source: BoundSource,
    #[arg(long = "T")]
    pub t_max: usize,
    #[arg(long)]
    pub kappa: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    /// Defaults to kappa * mu
    #[arg(long = "L")]
    pub l: Option<f64>,
    #[arg(long = "Q", default_value_t = 1.0)]
    pub q: f64,
    #[arg(long = "D", default_value_t = 1.0)]
    pub d: f64,
    /// Scale a sequence, e.g. `r_hat=0.01` (repeatable)
    #[arg(long, value_name = "SEQ=FACTOR")]
    pub corrupt: Vec<String>,
    /// Full verdict table as CSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Echoed only; the check is deterministic
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TailArgs {
    /// Experiment config; omit with --gaussian
    #[arg(required_unless_present = "gaussian")]
    pub config: Option<PathBuf>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Trials per T (defaults to trials_per_T)
    #[arg(long)]
    pub trials: Option<usize>,
    /// Check the scalar tail inequality on synthetic draws instead
    #[arg(long, conflicts_with = "config")]
    pub gaussian: bool,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long = "B", default_value_t = 1e-9)]
    pub b: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    /// θ values for --gaussian
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    pub theta: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

/// Parse `args` (including the program name) and run; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let pool = match cli.jobs {
        Some(0) => {
            eprintln!("error: --jobs must be at least 1");
            return EXIT_USAGE;
        }
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_RUNTIME;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Tailcheck(a) => cmd_tailcheck(a),
    });
    match result {
        Ok(code) => code,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

pub fn main() -> i32 {
    run_cli(std::env::args_os())
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_csv(path: Option<&Path>, header: &[&str], rows: &[Vec<String>]) -> Result<(), Failure> {
    let sink: Box<dyn Write> = match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(std::fs::File::create(p)?)
        }
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_summary(csv_path: Option<&Path>, summary: &serde_json::Value) -> Result<Option<PathBuf>, Failure> {
    let Some(p) = csv_path else { return Ok(None) };
    let path = p.with_extension("json");
    std::fs::write(&path, serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(Some(path))
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, toml::Value)>, Failure> {
    raw.iter().map(|s| parse_override(s).map_err(Failure::Usage)).collect()
}

fn load_experiment(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut file = load_config(path, &parse_overrides(overrides)?)?;
    if let Some(s) = seed {
        file.base_seed = s;
    }
    let cfg: ExperimentConfig = file.into();
    cfg.build().map_err(usage)?;
    Ok(cfg)
}

pub const RUN_COLUMNS: [&str; 9] = [
    "T",
    "theta",
    "empirical_quantile",
    "bound_quantile",
    "exceedance_frac",
    "exp_neg_theta",
    "median_gap",
    "mean_gap",
    "violation",
];

fn run_row(r: &ComparisonRow) -> Vec<String> {
    vec![
        r.t_max.to_string(),
        fmt_opt(r.theta),
        fmt_opt(r.empirical_quantile),
        fmt_opt(r.bound_quantile),
        fmt_opt(r.exceedance_frac),
        fmt_opt(r.exp_neg_theta),
        fmt_f64(r.median_gap),
        fmt_f64(r.mean_gap),
        r.violation.to_string(),
    ]
}

fn cmd_run(a: &RunArgs) -> Result<i32, Failure> {
    let cfg = load_experiment(&a.config, &a.overrides, a.seed)?;
    let out = a.out.clone().or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
    let result = run_sweep(&cfg).map_err(runtime)?;
    let table = result_table(&result).map_err(runtime)?;
    let rows: Vec<Vec<String>> = table.iter().map(run_row).collect();
    write_csv(out.as_deref(), &RUN_COLUMNS, &rows)?;

    let summary = json!({
        "fitted_slope": result.fitted_slope,
        "slope_stderr": result.slope_stderr,
        "bound_source": result.bound_source,
        "constants": result.constants,
        "violations": table.iter().filter(|r| r.violation).count(),
        "per_T": result.rows,
        "seeds": {
            "base_seed": cfg.base_seed,
            "stride": SEED_STRIDE,
            "rule": "base_seed + i * stride + j",
        },
        "config": ConfigFile::from(&cfg),
    });
    if let Some(p) = write_summary(out.as_deref(), &summary)? {
        eprintln!("wrote {} rows to {} (summary {})", rows.len(), out.unwrap().display(), p.display());
    }
    if let Some(s) = result.fitted_slope {
        eprintln!("fitted log-log slope of the median gap: {s:.4}");
    }
    Ok(EXIT_OK)
}

fn parse_corruption(s: &str) -> Result<(Sequence, f64), Failure> {
    let (k, v) = s.split_once('=').ok_or_else(|| Failure::Usage(format!("--corrupt `{s}` is not SEQ=FACTOR")))?;
    let seq = k.trim().parse::<Sequence>().map_err(Failure::Usage)?;
    let factor = v
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|f| f.is_finite())
        .ok_or_else(|| Failure::Usage(format!("--corrupt `{s}`: bad factor")))?;
    Ok((seq, factor))
}

fn verdict_row(v: &Verdict) -> Vec<String> {
    vec![
        v.condition_id.to_string(),
        v.t.to_string(),
        fmt_f64(v.lhs),
        fmt_f64(v.rhs),
        v.pass.to_string(),
        fmt_f64(v.slack),
    ]
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32, Failure> {
    if a.t_max < 2 {
        return Err(Failure::Usage("--T must be at least 2".into()));
    }
    if !(a.kappa >= 1.0) {
        return Err(Failure::Usage("--kappa must be at least 1".into()));
    }
    let l = a.l.unwrap_or(a.kappa * a.mu);
    if let Some(l) = a.l {
        if (l / a.mu - a.kappa).abs() > 1e-12 * a.kappa {
            return Err(Failure::Usage(format!("--L {l} and --mu {} disagree with --kappa {}", a.mu, a.kappa)));
        }
    }
    let corruptions: Vec<(Sequence, f64)> = a.corrupt.iter().map(|s| parse_corruption(s)).collect::<Result<_, _>>()?;
    let mut state = build_sequences(a.source, a.t_max, a.mu, l, a.q, a.d).map_err(usage)?;
    for &(seq, f) in &corruptions {
        state.corrupt(seq, f);
    }
    let verdicts = check_conditions(&state);
    let terminal = terminal_check(&state);
    let summary = summarize(&verdicts);

    println!("{} T={} kappa={} mu={} L={} Q={} D={}", a.source.name(), a.t_max, a.kappa, a.mu, l, a.q, a.d);
    println!("{:>9} {:>8} {:>14} {:>8}", "condition", "failures", "min_slack", "at_t");
    for c in &summary {
        println!("{:>9} {:>8} {:>14.6e} {:>8}", c.condition_id, c.failures, c.min_slack, c.worst_t);
    }
    println!(
        "terminal: X_(T+1) = {:.6e} vs R_bar_T + P_bar_T D^2 = {:.6e} -> {}",
        terminal.lhs,
        terminal.rhs,
        if terminal.pass { "pass" } else { "FAIL" }
    );
    let failures = verdicts.iter().filter(|v| !v.pass).count() + (!terminal.pass) as usize;
    println!("{} of {} checks failed", failures, verdicts.len() + 1);

    if a.out.is_some() {
        let rows: Vec<Vec<String>> = verdicts.iter().chain(std::iter::once(&terminal)).map(verdict_row).collect();
        write_csv(a.out.as_deref(), &["condition_id", "t", "lhs", "rhs", "pass", "slack"], &rows)?;
        let echo = json!({
            "source": a.source,
            "T": a.t_max,
            "kappa": a.kappa,
            "mu": a.mu,
            "L": l,
            "Q": a.q,
            "D": a.d,
            "corrupt": a.corrupt,
            "seed": a.seed,
        });
        write_summary(a.out.as_deref(), &json!({ "config": echo, "conditions": summary, "terminal": terminal, "failures": failures }))?;
    }
    Ok(if failures == 0 { EXIT_OK } else { EXIT_CHECK_FAILED })
}

#[derive(Serialize)]
struct TailRow<'a> {
    #[serde(rename = "T")]
    t_max: Option<usize>,
    trials: usize,
    #[serde(flatten)]
    row: &'a ExceedanceRow,
}

const TAIL_COLUMNS: [&str; 9] =
    ["T", "theta", "level", "exceedances", "trials", "exceedance_frac", "exp_neg_theta", "p_value", "reject"];

fn tail_csv_row(t: Option<usize>, trials: usize, r: &ExceedanceRow) -> Vec<String> {
    vec![
        t.map(|t| t.to_string()).unwrap_or_default(),
        fmt_f64(r.theta),
        fmt_f64(r.level),
        r.exceedances.to_string(),
        trials.to_string(),
        fmt_f64(r.fraction),
        fmt_f64(r.exp_neg_theta),
        fmt_f64(r.p_value),
        r.reject.to_string(),
    ]
}

fn print_tail_rows(t: Option<usize>, trials: usize, rows: &[ExceedanceRow]) {
    for r in rows {
        println!(
            "{:>7} {:>6} {:>14.6e} {:>6}/{:<8} {:>10.6} {:>10.6} {:>10.4} {}",
            t.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            r.theta,
            r.level,
            r.exceedances,
            trials,
            r.fraction,
            r.exp_neg_theta,
            r.p_value,
            if r.reject { "REJECT" } else { "ok" }
        );
    }
}

fn cmd_tailcheck(a: &TailArgs) -> Result<i32, Failure> {
    println!(
        "{:>7} {:>6} {:>14} {:>15} {:>10} {:>10} {:>10}",
        "T", "theta", "level", "exceed/trials", "fraction", "exp(-th)", "p_value"
    );
    let mut csv_rows = Vec::new();
    let mut tables: Vec<TailRow> = Vec::new();
    let mut rejected = false;
    let echo;

    let owned_rows: Vec<(Option<usize>, usize, Vec<ExceedanceRow>)>;
    if a.gaussian {
        if a.draws < MIN_TAIL_TRIALS {
            return Err(Failure::Usage(format!("--draws must be at least {MIN_TAIL_TRIALS}")));
        }
        let dist = TailDistribution::matched(a.sigma, a.b).map_err(usage)?;
        let seed = a.seed.unwrap_or(0);
        let samples = sample_tail(dist, a.draws, seed);
        let rows = exceedance_table(&samples, &a.theta, |th| {
            crate::bounds::tail_bound_theta(a.sigma, a.b, th).map(|(thr, _)| thr)
        })
        .map_err(usage)?;
        echo = json!({ "mode": "synthetic", "distribution": dist, "sigma": a.sigma, "B": a.b, "draws": a.draws, "theta": a.theta, "seed": seed });
        owned_rows = vec![(None, a.draws, rows)];
    } else {
        let path = a.config.as_deref().expect("clap enforces config");
        let cfg = load_experiment(path, &a.overrides, a.seed)?;
        let trials = a.trials.unwrap_or(cfg.trials_per_t);
        if trials < MIN_TAIL_TRIALS {
            return Err(Failure::Usage(format!("tail checks need at least {MIN_TAIL_TRIALS} trials, got {trials}")));
        }
        if cfg.theta_grid.is_empty() {
            return Err(Failure::Usage("theta_grid is empty".into()));
        }
        let (spec, schedule) = cfg.build().map_err(usage)?;
        if BoundSource::for_schedule(&schedule.kind).is_none() {
            return Err(Failure::Usage(format!("schedule {} has no stated bound", schedule.kind.name())));
        }
        let x0 = spec.default_start();
        let mut collected = Vec::new();
        for (i, &t_max) in cfg.t_grid.iter().enumerate() {
            let runner = TailRunner {
                problem: spec.clone(),
                schedule,
                t_max,
                x0: x0.clone(),
                base_seed: cfg.seed(i, 0).expect("validated"),
            };
            let table = mc_tail_check(trials, &cfg.theta_grid, &runner).map_err(runtime)?;
            collected.push((Some(t_max), trials, table.rows));
        }
        let mut file = ConfigFile::from(&cfg);
        file.trials_per_t = trials;
        echo = json!({ "mode": "optimizer", "config": file, "seed_rule": "base_seed + i * 1000000 + j" });
        owned_rows = collected;
    }

    for (t, trials, rows) in &owned_rows {
        print_tail_rows(*t, *trials, rows);
        for r in rows {
            rejected |= r.reject;
            csv_rows.push(tail_csv_row(*t, *trials, r));
            tables.push(TailRow { t_max: *t, trials: *trials, row: r });
        }
    }
    if a.out.is_some() {
        write_csv(a.out.as_deref(), &TAIL_COLUMNS, &csv_rows)?;
        write_summary(a.out.as_deref(), &json!({ "config": echo, "rows": tables, "rejected": rejected }))?;
    }
    Ok(if rejected { EXIT_CHECK_FAILED } else { EXIT_OK })
}
