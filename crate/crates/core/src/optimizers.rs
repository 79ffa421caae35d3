//! Projected SGD with a running weighted average, and its accelerated variant.
//!
//! Both runs are instrumented: `A_t = ||x_t - x*||^2` is recorded for every
//! iterate, and with `assert_lemma` set the per-iteration descent inequality
//! is evaluated on the realized noise `delta_t` and any violation is counted.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{prox_step_unchecked, Vector};
use crate::error::{invalid, Error, Result};
use crate::problems::ProblemSpec;
use crate::schedules::{ScheduleConfig, ScheduleKind};

/// Absolute slack allowed on the per-iteration inequality, scaled by the
/// magnitude of its largest term.
pub const LEMMA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    pub assert_lemma: bool,
    /// Keep every `x_t`, `x̄_t` (and `y_t` for the accelerated method).
    pub keep_trace: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub xs: Vec<Vector>,
    pub xbars: Vec<Vector>,
    pub ys: Vec<Vector>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRecord {
    #[serde(rename = "T")]
    pub t_max: usize,
    /// `f(output_t) - f(x*)` for `t = 1..=T`.
    pub gaps: Vec<f64>,
    /// `A_t` for `t = 0..=T`.
    #[serde(rename = "A")]
    pub a: Vec<f64>,
    pub final_gap: f64,
    pub lemma_violations: usize,
    /// Largest `lhs - rhs` seen while asserting the lemma (negative when it always held).
    pub worst_lemma_excess: f64,
    pub seed: u64,
    #[serde(skip)]
    pub output: Vector,
    #[serde(skip)]
    pub trace: Option<Trace>,
}

fn validate_run(spec: &ProblemSpec, cfg: &ScheduleConfig, t_max: usize, x0: &Vector) -> Result<()> {
    if t_max == 0 {
        return Err(invalid("horizon T must be at least 1"));
    }
    if x0.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: x0.len() });
    }
    if !spec.is_feasible(x0) {
        return Err(Error::Infeasible("initial point lies outside the feasible set".into()));
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    if !close(cfg.mu, spec.mu()) || !close(cfg.kappa, spec.kappa()) {
        return Err(invalid(format!(
            "schedule constants (mu={}, kappa={}) do not match the problem (mu={}, kappa={})",
            cfg.mu,
            cfg.kappa,
            spec.mu(),
            spec.kappa()
        )));
    }
    cfg.check_preconditions(t_max)
}

pub fn run_sgd(
    spec: &ProblemSpec,
    cfg: &ScheduleConfig,
    t_max: usize,
    x0: &Vector,
    seed: u64,
    assert_lemma: bool,
) -> Result<RunRecord> {
    run_sgd_with(spec, cfg, t_max, x0, seed, RunOptions { assert_lemma, keep_trace: false })
}

pub fn run_sgd_with(
    spec: &ProblemSpec,
    cfg: &ScheduleConfig,
    t_max: usize,
    x0: &Vector,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord> {
    if cfg.kind == ScheduleKind::Thm2 {
        return Err(Error::Unsupported("the thm2 schedule drives the accelerated method".into()));
    }
    validate_run(spec, cfg, t_max, x0)?;

    let table = cfg.table(t_max)?;
    let (mu, l, q) = (spec.mu(), spec.l(), spec.noise_radius());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let averaging = cfg.kind.averages();

    let mut x = x0.clone();
    let mut xbar = x0.clone();
    let mut a = Vec::with_capacity(t_max + 1);
    a.push((&x - &spec.x_star).norm_squared());
    let mut gaps = Vec::with_capacity(t_max);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut trace = opts.keep_trace.then(|| Trace { xs: vec![x.clone()], xbars: vec![xbar.clone()], ys: Vec::new() });

    for (i, &(alpha, gamma)) in table.iter().enumerate() {
        let sample = spec.sample_gradient(&x, &mut rng);
        let x_next = prox_step_unchecked(&spec.feasible, &x, &sample.g_noisy, gamma);
        let a_prev = a[i];
        let a_next = (&x_next - &spec.x_star).norm_squared();

        if opts.assert_lemma {
            // f(x_t) - f* <= (1 - g mu)/(2g) A_{t-1} - A_t/(2g) - Q B_t + g/(2(1 - g L)) Q^2 C_t
            let lhs = spec.eval_f(&x_next);
            let terms = [
                (1.0 - gamma * mu) / (2.0 * gamma) * a_prev,
                -a_next / (2.0 * gamma),
                -sample.delta.dot(&(&x - &spec.x_star)),
                gamma / (2.0 * (1.0 - gamma * l)) * sample.delta.norm_squared(),
            ];
            let (excess, bad) = lemma_excess(lhs, &terms);
            worst = worst.max(excess);
            violations += bad as usize;
        }
        debug_assert!(q == 0.0 || sample.delta.norm() <= q);

        if averaging {
            xbar += (&x_next - &xbar) * alpha;
        } else {
            xbar.copy_from(&x_next);
        }
        x = x_next;
        a.push(a_next);
        gaps.push(spec.eval_f(&xbar));
        if let Some(tr) = trace.as_mut() {
            tr.xs.push(x.clone());
            tr.xbars.push(xbar.clone());
        }
    }

    Ok(RunRecord {
        t_max,
        final_gap: *gaps.last().expect("T >= 1"),
        gaps,
        a,
        lemma_violations: violations,
        worst_lemma_excess: worst,
        seed,
        output: xbar,
        trace,
    })
}

pub fn run_accel(
    spec: &ProblemSpec,
    cfg: &ScheduleConfig,
    t_max: usize,
    x0: &Vector,
    seed: u64,
    assert_lemma: bool,
) -> Result<RunRecord> {
    run_accel_with(spec, cfg, t_max, x0, seed, RunOptions { assert_lemma, keep_trace: false })
}

pub fn run_accel_with(
    spec: &ProblemSpec,
    cfg: &ScheduleConfig,
    t_max: usize,
    x0: &Vector,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord> {
    if cfg.kind != ScheduleKind::Thm2 {
        return Err(Error::Unsupported(format!(
            "the accelerated method needs the thm2 schedule, got {}",
            cfg.kind.name()
        )));
    }
    validate_run(spec, cfg, t_max, x0)?;

    let table = cfg.table(t_max)?;
    let (mu, l) = (spec.mu(), spec.l());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut x = x0.clone();
    let mut xbar = x0.clone();
    let mut f_bar = spec.eval_f(&xbar);
    let mut a = Vec::with_capacity(t_max + 1);
    a.push((&x - &spec.x_star).norm_squared());
    let mut gaps = Vec::with_capacity(t_max);
    let mut violations = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut trace = opts.keep_trace.then(|| Trace { xs: vec![x.clone()], xbars: vec![xbar.clone()], ys: Vec::new() });

    for (i, &(alpha, gamma)) in table.iter().enumerate() {
        let y = &x * alpha + &xbar * (1.0 - alpha);
        let sample = spec.sample_gradient(&y, &mut rng);
        let shifted = &sample.g_noisy - (&y - &x) * mu;
        let x_next = prox_step_unchecked(&spec.feasible, &x, &shifted, gamma);
        let xbar_next = &xbar + (&x_next - &xbar) * alpha;
        let a_prev = a[i];
        let a_next = (&x_next - &spec.x_star).norm_squared();
        let f_next = spec.eval_f(&xbar_next);

        if opts.assert_lemma {
            let terms = [
                (1.0 - alpha) * f_bar,
                alpha * (1.0 - gamma * mu) / (2.0 * gamma) * a_prev,
                -alpha / (2.0 * gamma) * a_next,
                -alpha * sample.delta.dot(&(&x - &spec.x_star)),
                alpha * gamma / (2.0 * (1.0 - alpha * gamma * l - gamma * mu)) * sample.delta.norm_squared(),
            ];
            let (excess, bad) = lemma_excess(f_next, &terms);
            worst = worst.max(excess);
            violations += bad as usize;
        }

        if let Some(tr) = trace.as_mut() {
            tr.ys.push(y);
        }
        x = x_next;
        xbar = xbar_next;
        f_bar = f_next;
        a.push(a_next);
        gaps.push(f_bar);
        if let Some(tr) = trace.as_mut() {
            tr.xs.push(x.clone());
            tr.xbars.push(xbar.clone());
        }
    }

    Ok(RunRecord {
        t_max,
        final_gap: *gaps.last().expect("T >= 1"),
        gaps,
        a,
        lemma_violations: violations,
        worst_lemma_excess: worst,
        seed,
        output: xbar,
        trace,
    })
}

/// Runs whichever method the schedule belongs to.
pub fn run(
    spec: &ProblemSpec,
    cfg: &ScheduleConfig,
    t_max: usize,
    x0: &Vector,
    seed: u64,
    opts: RunOptions,
) -> Result<RunRecord> {
    match cfg.kind {
        ScheduleKind::Thm2 => run_accel_with(spec, cfg, t_max, x0, seed, opts),
        _ => run_sgd_with(spec, cfg, t_max, x0, seed, opts),
    }
}

fn lemma_excess(lhs: f64, terms: &[f64]) -> (f64, bool) {
    let rhs: f64 = terms.iter().sum();
    let scale = terms.iter().fold(lhs.abs().max(1.0), |m, t| m.max(t.abs()));
    let excess = lhs - rhs;
    (excess, excess > LEMMA_TOL * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{FeasibleSet, MEMBERSHIP_TOL};
    use crate::problems::make_problem;
    use crate::schedules::weights;

    fn unit_problem(q: f64) -> ProblemSpec {
        make_problem(1, 1.0, 1.0, 0, FeasibleSet::origin_ball(1, 1.0).unwrap(), q, true).unwrap()
    }

    fn cfg_for(spec: &ProblemSpec, kind: ScheduleKind) -> ScheduleConfig {
        ScheduleConfig::new(kind, spec.mu(), spec.kappa()).unwrap()
    }

    #[test]
    fn noiseless_thm1_decreases_and_meets_bound() {
        let spec = unit_problem(0.0);
        let cfg = cfg_for(&spec, ScheduleKind::Thm1);
        let t_max = 200;
        let rec = run_sgd(&spec, &cfg, t_max, &spec.default_start(), 1, true).unwrap();
        assert!(rec.gaps.windows(2).all(|w| w[1] <= w[0]));
        let d = spec.diameter();
        assert!(rec.final_gap <= d * d * spec.l() / t_max as f64);
        assert_eq!(rec.lemma_violations, 0);
    }

    #[test]
    fn optimum_is_a_fixed_point() {
        let spec = make_problem(3, 1.0, 4.0, 5, FeasibleSet::origin_ball(3, 1.0).unwrap(), 0.0, false).unwrap();
        for kind in [ScheduleKind::Thm1, ScheduleKind::PropOriginal, ScheduleKind::Thm2] {
            let cfg = cfg_for(&spec, kind);
            let rec = run(&spec, &cfg, 50, &spec.x_star, 3, RunOptions::default()).unwrap();
            assert!(rec.gaps.iter().all(|g| *g == 0.0));
            assert!(rec.a.iter().all(|a| *a == 0.0));
        }
    }

    #[test]
    fn first_step_average_is_first_iterate() {
        let spec = make_problem(2, 1.0, 2.0, 1, FeasibleSet::origin_ball(2, 1.0).unwrap(), 0.5, false).unwrap();
        let cfg = cfg_for(&spec, ScheduleKind::Thm1);
        let opts = RunOptions { assert_lemma: false, keep_trace: true };
        let rec = run_sgd_with(&spec, &cfg, 1, &spec.default_start(), 9, opts).unwrap();
        let tr = rec.trace.unwrap();
        assert_eq!(tr.xbars[1], tr.xs[1]);
    }

    #[test]
    fn accel_first_query_point_is_start() {
        let spec = make_problem(2, 1.0, 2.0, 1, FeasibleSet::origin_ball(2, 1.0).unwrap(), 0.5, false).unwrap();
        let cfg = cfg_for(&spec, ScheduleKind::Thm2);
        let opts = RunOptions { assert_lemma: false, keep_trace: true };
        let x0 = spec.default_start();
        let rec = run_accel_with(&spec, &cfg, 5, &x0, 9, opts).unwrap();
        assert_eq!(rec.trace.unwrap().ys[0], x0);
    }

    #[test]
    fn noiseless_accel_meets_quadratic_rate() {
        for l in [1.0, 3.0, 10.0] {
            let spec = make_problem(1, l, l, 0, FeasibleSet::origin_ball(1, 1.0).unwrap(), 0.0, true).unwrap();
            let cfg = cfg_for(&spec, ScheduleKind::Thm2);
            let d = spec.diameter();
            for t_max in 8..=300 {
                let rec = run_accel(&spec, &cfg, t_max, &spec.default_start(), 0, true).unwrap();
                assert!(rec.final_gap <= 2.0 * d * d * l / (t_max * t_max) as f64, "L={l} T={t_max}");
                assert_eq!(rec.lemma_violations, 0);
            }
        }
    }

    #[test]
    fn interior_mode_outputs_last_iterate() {
        let spec = make_problem(2, 1.0, 2.0, 1, FeasibleSet::origin_ball(2, 1.0).unwrap(), 0.5, true).unwrap();
        let cfg = cfg_for(&spec, ScheduleKind::PropInterior);
        let opts = RunOptions { assert_lemma: true, keep_trace: true };
        let rec = run_sgd_with(&spec, &cfg, 30, &spec.default_start(), 4, opts).unwrap();
        let tr = rec.trace.as_ref().unwrap();
        assert_eq!(tr.xbars, tr.xs);
        assert_eq!(rec.final_gap, spec.eval_f(&tr.xs[30]));
        assert_eq!(rec.lemma_violations, 0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let spec = unit_problem(0.1);
        let cfg = cfg_for(&spec, ScheduleKind::Thm1);
        let outside = Vector::from_element(1, 1.5);
        assert!(matches!(run_sgd(&spec, &cfg, 10, &outside, 0, false), Err(Error::Infeasible(_))));
        assert!(run_sgd(&spec, &cfg, 0, &spec.x_star, 0, false).is_err());
        assert!(run_sgd(&spec, &cfg, 5, &Vector::zeros(2), 0, false).is_err());
        let accel_cfg = cfg_for(&spec, ScheduleKind::Thm2);
        assert!(matches!(run_sgd(&spec, &accel_cfg, 5, &spec.x_star, 0, false), Err(Error::Unsupported(_))));
        assert!(matches!(run_accel(&spec, &cfg, 5, &spec.x_star, 0, false), Err(Error::Unsupported(_))));
        let mismatched = ScheduleConfig::new(ScheduleKind::Thm1, 2.0, 1.0).unwrap();
        assert!(run_sgd(&spec, &mismatched, 5, &spec.x_star, 0, false).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let spec = make_problem(4, 1.0, 5.0, 2, FeasibleSet::origin_ball(4, 1.0).unwrap(), 1.0, false).unwrap();
        for kind in [ScheduleKind::Thm1, ScheduleKind::Thm2] {
            let cfg = cfg_for(&spec, kind);
            let a = run(&spec, &cfg, 300, &spec.default_start(), 77, RunOptions::default()).unwrap();
            let b = run(&spec, &cfg, 300, &spec.default_start(), 77, RunOptions::default()).unwrap();
            assert_eq!(a, b);
            let c = run(&spec, &cfg, 300, &spec.default_start(), 78, RunOptions::default()).unwrap();
            assert_ne!(a.gaps, c.gaps);
        }
    }

    #[test]
    fn iterates_stay_feasible_and_average_matches_weights() {
        let spec = make_problem(3, 1.0, 6.0, 3, FeasibleSet::origin_ball(3, 0.5).unwrap(), 2.0, false).unwrap();
        let opts = RunOptions { assert_lemma: true, keep_trace: true };
        for kind in [
            ScheduleKind::Thm1,
            ScheduleKind::PropOriginal,
            ScheduleKind::GeneralizedR { r: 1.5 },
            ScheduleKind::Thm2,
        ] {
            let cfg = cfg_for(&spec, kind);
            let t_max = 400;
            let rec = run(&spec, &cfg, t_max, &spec.default_start(), 21, opts).unwrap();
            assert_eq!(rec.lemma_violations, 0, "{kind:?}");
            let tr = rec.trace.as_ref().unwrap();
            for p in tr.xs.iter().chain(&tr.xbars).chain(&tr.ys) {
                assert!(spec.feasible.contains(p, MEMBERSHIP_TOL));
            }
            assert!(rec.a[0] <= spec.diameter().powi(2));
            let w = weights(&kind, t_max).unwrap();
            let explicit = tr.xs[1..].iter().zip(&w).fold(Vector::zeros(3), |acc, (x, wt)| acc + x * *wt);
            assert!((&explicit - &rec.output).norm() <= 1e-8 * rec.output.norm().max(1e-12), "{kind:?}");
        }
    }

    #[test]
    fn gaps_are_nonnegative() {
        let spec = make_problem(5, 1.0, 4.0, 0, FeasibleSet::origin_ball(5, 1.0).unwrap(), 1.0, false).unwrap();
        let cfg = cfg_for(&spec, ScheduleKind::Thm1);
        let rec = run_sgd(&spec, &cfg, 500, &spec.default_start(), 3, false).unwrap();
        assert!(rec.gaps.iter().all(|g| *g >= -1e-12));
    }
}
