//! Numeric checks of the machinery behind the high-probability bounds.
//!
//! [`build_sequences`] instantiates the recursion coefficients and the five
//! dominating sequences for each bound; [`check_conditions`] evaluates the seven
//! recursive inequalities they must satisfy at every `t`. [`mc_tail_check`]
//! and [`tail_inequality_monte_carlo`] compare realized tails with the stated ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{bound_for, tail_bound_theta, BoundConstants, BoundSource, BoundTriple};
use crate::domain::Vector;
use crate::error::{invalid, Error, Result};
use crate::optimizers::{run, RunOptions};
use crate::problems::ProblemSpec;
use crate::schedules::{log_tilde, ScheduleConfig};
use crate::stats::binomial_upper_p_value;

/// Relative slack allowed on each inequality.
pub const VERDICT_RTOL: f64 = 1e-12;

/// Significance level of the one-sided exceedance tests.
pub const TAIL_TEST_LEVEL: f64 = 0.01;

/// Coefficients of `A_t <= d_t (a_t A_{t-1} + 2 b_t B_t + c_t C_t)` and of the
/// increment `X_t = w_t (ã_t A_{t-1} + 2 b̃_t B_t + c̃_t C_t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub w: f64,
    pub a_tilde: f64,
    pub b_tilde: f64,
    pub c_tilde: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sequence {
    PBar,
    RBar,
    PTildeSq,
    RTildeSq,
    RHat,
}

impl std::str::FromStr for Sequence {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "p_bar" => Sequence::PBar,
            "r_bar" => Sequence::RBar,
            "p_tilde_sq" => Sequence::PTildeSq,
            "r_tilde_sq" => Sequence::RTildeSq,
            "r_hat" => Sequence::RHat,
            other => return Err(format!("unknown sequence `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecursionState {
    pub source: BoundSource,
    #[serde(rename = "T")]
    pub t_max: usize,
    pub kappa: f64,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(rename = "D")]
    pub d: f64,
    /// Indexed `t = 0..=T`.
    pub p_bar: Vec<f64>,
    pub r_bar: Vec<f64>,
    pub p_tilde_sq: Vec<f64>,
    pub r_tilde_sq: Vec<f64>,
    pub r_hat: Vec<f64>,
    /// `coeffs[t - 1]` holds the coefficients of step `t`.
    pub coeffs: Vec<Coefficients>,
    /// Worst case of the terminal increment `X_{T+1}` given `A_T <= D^2`.
    pub terminal_increment: f64,
}

impl RecursionState {
    pub fn coeff(&self, t: usize) -> &Coefficients {
        &self.coeffs[t - 1]
    }

    pub fn sequence_mut(&mut self, which: Sequence) -> &mut Vec<f64> {
        match which {
            Sequence::PBar => &mut self.p_bar,
            Sequence::RBar => &mut self.r_bar,
            Sequence::PTildeSq => &mut self.p_tilde_sq,
            Sequence::RTildeSq => &mut self.r_tilde_sq,
            Sequence::RHat => &mut self.r_hat,
        }
    }

    /// Multiply one sequence by `factor`, e.g. as a negative control.
    pub fn corrupt(&mut self, which: Sequence, factor: f64) {
        for v in self.sequence_mut(which).iter_mut() {
            *v *= factor;
        }
    }
}

pub fn build_sequences(source: BoundSource, t_max: usize, mu: f64, l: f64, q: f64, d: f64) -> Result<RecursionState> {
    if t_max < 2 {
        return Err(invalid("recursion checks need T >= 2"));
    }
    if !(mu > 0.0 && l.is_finite() && q >= 0.0 && d > 0.0) {
        return Err(invalid(format!("bad constants mu={mu}, L={l}, Q={q}, D={d}")));
    }
    let kappa = l / mu;
    if !(kappa >= 1.0) {
        return Err(invalid(format!("kappa = L/mu must be >= 1, got {kappa}")));
    }

    let tt = t_max as f64;
    let q2 = q * q;
    let q4 = q2 * q2;
    let harmonic: Vec<f64> = {
        // ln~(T, t) for t = 0..=T, accumulated from the top
        let mut h = vec![0.0; t_max + 1];
        for t in (0..t_max).rev() {
            h[t] = h[t + 1] + 1.0 / (t + 1) as f64;
        }
        h
    };
    debug_assert!((harmonic[1] - log_tilde(t_max, 1).unwrap_or(0.0)).abs() < 1e-12);

    let n = t_max + 1;
    let mut p_bar = vec![0.0; n];
    let mut r_bar = vec![0.0; n];
    let mut p_tilde_sq = vec![0.0; n];
    let mut r_tilde_sq = vec![0.0; n];
    let mut r_hat = vec![0.0; n];
    let mut coeffs = Vec::with_capacity(t_max);

    let terminal_increment = match source {
        BoundSource::Thm1 => {
            let norm = tt * tt * (tt + 1.0) * (tt + 1.0);
            for t in 0..n {
                let s = tt - t as f64;
                let u = t as f64 + 2.0 * kappa;
                r_bar[t] = l * d * d / tt + 2.0 * kappa * q2 * s / (l * tt * tt);
                p_tilde_sq[t] = 4.0 * q2 * s * (u + 2.0) * (u - 1.0) / norm;
                r_tilde_sq[t] = q4 * kappa * kappa / (l * l * norm)
                    * (8.0 * s * (s - 1.0) + 32.0 * kappa * tt * harmonic[t]);
                r_hat[t] = 5.0 * kappa * q2 * s / (l * tt * tt);
            }
            for t in 1..=t_max {
                let tf = t as f64;
                let (b, c) = (-q / 2.0, q2 / (mu * tf));
                coeffs.push(Coefficients {
                    a: mu * (tf + 2.0 * kappa - 2.0) / 4.0,
                    b,
                    c,
                    d: 4.0 / (mu * (tf + 2.0 * kappa + 2.0)),
                    w: 2.0 * tf / (tt * (tt + 1.0)),
                    a_tilde: 0.0,
                    b_tilde: b,
                    c_tilde: c,
                });
            }
            l * d * d / tt
        }
        BoundSource::PropOriginal => {
            let det = l * d * d / (2.0 * tt);
            for t in 0..n {
                let tf = t as f64;
                // constant offset carries the deterministic X_{T+1}; differences are as stated
                r_bar[t] = det + q2 / (2.0 * mu * tt) * harmonic[t];
                p_tilde_sq[t] = q2 * (tf + kappa + 1.0) / (tt * tt);
                r_tilde_sq[t] = q4 / (mu * mu * tt * tt) * harmonic[t];
                r_hat[t] = 3.0 * q2 / (mu * tt);
            }
            for t in 1..=t_max {
                let tf = t as f64;
                let (b, c) = (-q / 2.0, q2 / (2.0 * mu * tf));
                coeffs.push(Coefficients {
                    a: mu * (tf + kappa - 1.0) / 2.0,
                    b,
                    c,
                    d: 2.0 / (mu * (tf + kappa + 1.0)),
                    w: 1.0 / tt,
                    a_tilde: 0.0,
                    b_tilde: b,
                    c_tilde: c,
                });
            }
            det
        }
        BoundSource::PropInterior => {
            let tk = tt + kappa;
            let tk1 = tt + kappa + 1.0;
            let k2 = kappa * kappa;
            for t in 0..n {
                let tf = t as f64;
                let s = tt - tf;
                let v = tf + kappa;
                p_bar[t] = l * v * (v + 1.0) / (2.0 * tk * tk1);
                r_bar[t] = k2 * q2 / (2.0 * l * tk * tk1) * (s + kappa * harmonic[t]);
                p_tilde_sq[t] = q2 * k2 * s * v * (v + 1.0) / (2.0 * tk * tk * tk1 * tk1);
                r_tilde_sq[t] = k2 * k2 * q4 / (4.0 * l * l * tk * tk * tk1 * tk1)
                    * (s * (s - 1.0) + kappa * tt * harmonic[t]);
                r_hat[t] = 2.0 * k2 * q2 * s / (l * tk * tk1);
            }
            for t in 1..=t_max {
                let tf = t as f64;
                coeffs.push(Coefficients {
                    a: mu * (tf + kappa - 1.0) / 2.0,
                    b: -q / 2.0,
                    c: q2 / (2.0 * mu * tf),
                    d: 2.0 / (mu * (tf + kappa + 1.0)),
                    w: 0.0,
                    a_tilde: 0.0,
                    b_tilde: 0.0,
                    c_tilde: 0.0,
                });
            }
            // X_{T+1} = (L/2) A_T
            l / 2.0 * d * d
        }
        BoundSource::Thm2 => {
            let t4 = tt.powi(4);
            for t in 0..n {
                let tf = t as f64;
                let s = tt - tf;
                r_bar[t] = 2.0 * l * d * d / (tt * tt) + 2.0 * kappa * q2 * s / (l * tt * tt);
                p_tilde_sq[t] = 5.0 * q2 * s * (tf * (tf + 1.0) + 4.0 * kappa) / t4;
                r_tilde_sq[t] = 5.0 * kappa * kappa * q4 * s * (s - 1.0) / (2.0 * l * l * t4);
                r_hat[t] = 4.0 * kappa * q2 * s / (l * tt * tt);
            }
            for t in 1..=t_max {
                let tf = t as f64;
                let (b, c) = (-q / 2.0, q2 / (mu * tf));
                coeffs.push(Coefficients {
                    a: mu * (4.0 * kappa + tf * (tf - 1.0)) / (2.0 * tf),
                    b,
                    c,
                    d: 2.0 * tf / (mu * (4.0 * kappa + tf * (tf + 1.0))),
                    w: 2.0 * tf / (tt * (tt + 1.0)),
                    a_tilde: 0.0,
                    b_tilde: b,
                    c_tilde: c,
                });
            }
            2.0 * l * d * d / (tt * (tt + 1.0))
        }
    };

    Ok(RecursionState {
        source,
        t_max,
        kappa,
        mu,
        l,
        q,
        d,
        p_bar,
        r_bar,
        p_tilde_sq,
        r_tilde_sq,
        r_hat,
        coeffs,
        terminal_increment,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub condition_id: u8,
    pub t: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
    pub slack: f64,
}

impl Verdict {
    fn new(condition_id: u8, t: usize, lhs: f64, rhs: f64) -> Self {
        let pass = lhs <= rhs + VERDICT_RTOL * lhs.abs().max(rhs.abs());
        Verdict { condition_id, t, lhs, rhs, pass, slack: rhs - lhs }
    }
}

/// All seven inequalities for every `t = 1..=T`, ordered by `t` then condition.
pub fn check_conditions(state: &RecursionState) -> Vec<Verdict> {
    let mut out = Vec::with_capacity(7 * state.t_max);
    for t in 1..=state.t_max {
        let k = state.coeff(t);
        let (pb, pb0) = (state.p_bar[t], state.p_bar[t - 1]);
        let (rb, rb0) = (state.r_bar[t], state.r_bar[t - 1]);
        let (pt, pt0) = (state.p_tilde_sq[t], state.p_tilde_sq[t - 1]);
        let (rt, rt0) = (state.r_tilde_sq[t], state.r_tilde_sq[t - 1]);
        let (rh, rh0) = (state.r_hat[t], state.r_hat[t - 1]);
        let ad = k.a * k.d;
        let cross = k.w * k.b_tilde + k.b * k.d * pb;

        out.push(Verdict::new(1, t, ad * pb + k.w * k.a_tilde, pb0));
        out.push(Verdict::new(2, t, rb + k.w * k.c_tilde + k.c * k.d * pb, rb0));
        out.push(Verdict::new(3, t, ad * pt + 4.0 * cross * cross, pt0));
        out.push(Verdict::new(4, t, rt + k.c * k.d * pt, rt0));
        out.push(Verdict::new(5, t, rh, rh0));
        out.push(Verdict::new(6, t, ad * pt * rh + 4.0 * k.b * k.d * cross * pt, pt0 * rh0));
        out.push(Verdict::new(
            7,
            t,
            ad * pt * rh * rh + 4.0 * k.b * k.d * cross * pt * rh + 2.0 * k.b * k.b * k.d * k.d * pt * pt,
            pt0 * rh0 * rh0,
        ));
    }
    out
}

/// Base case of the induction: `X_{T+1} <= R̄_T + P̄_T D^2` for the worst-case terminal increment.
pub fn terminal_check(state: &RecursionState) -> Verdict {
    let t = state.t_max;
    let rhs = state.r_bar[t] + state.p_bar[t] * state.d * state.d;
    Verdict::new(0, t + 1, state.terminal_increment, rhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionSummary {
    pub condition_id: u8,
    pub failures: usize,
    pub min_slack: f64,
    pub worst_t: usize,
}

pub fn summarize(verdicts: &[Verdict]) -> Vec<ConditionSummary> {
    (1..=7u8)
        .map(|id| {
            let mut s = ConditionSummary { condition_id: id, failures: 0, min_slack: f64::INFINITY, worst_t: 0 };
            for v in verdicts.iter().filter(|v| v.condition_id == id) {
                s.failures += (!v.pass) as usize;
                if v.slack < s.min_slack {
                    s.min_slack = v.slack;
                    s.worst_t = v.t;
                }
            }
            s
        })
        .collect()
}

/// What [`mc_tail_check`] runs: one seeded optimization per trial.
#[derive(Debug, Clone)]
pub struct TailRunner {
    pub problem: ProblemSpec,
    pub schedule: ScheduleConfig,
    pub t_max: usize,
    pub x0: Vector,
    pub base_seed: u64,
}

impl TailRunner {
    pub fn constants(&self) -> BoundConstants {
        BoundConstants {
            d: self.problem.diameter(),
            l: self.problem.l(),
            q: self.problem.noise_radius(),
            kappa: self.problem.kappa(),
        }
    }

    pub fn bound(&self) -> Result<BoundTriple> {
        let source = BoundSource::for_schedule(&self.schedule.kind)
            .ok_or_else(|| Error::Unsupported(format!("no bound is stated for {}", self.schedule.kind.name())))?;
        bound_for(source, &self.constants(), self.t_max)
    }

    /// Final gaps of `trials` runs, in seed order.
    pub fn final_gaps(&self, trials: usize) -> Result<Vec<f64>> {
        (0..trials)
            .into_par_iter()
            .map(|j| {
                run(&self.problem, &self.schedule, self.t_max, &self.x0, self.base_seed + j as u64, RunOptions::default())
                    .map(|r| r.final_gap)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceRow {
    pub theta: f64,
    pub level: f64,
    pub exceedances: usize,
    pub fraction: f64,
    pub exp_neg_theta: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExceedanceTable {
    pub trials: usize,
    pub bound: Option<BoundTriple>,
    pub rows: Vec<ExceedanceRow>,
}

impl ExceedanceTable {
    pub fn any_rejected(&self) -> bool {
        self.rows.iter().any(|r| r.reject)
    }
}

/// Build the exceedance table for observed samples against `level(θ)` with nominal tail `exp(-θ)`.
pub fn exceedance_table(
    samples: &[f64],
    theta_grid: &[f64],
    level: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<ExceedanceRow>> {
    let n = samples.len();
    theta_grid
        .iter()
        .map(|&theta| {
            let lvl = level(theta)?;
            let exceedances = samples.iter().filter(|g| **g >= lvl).count();
            let nominal = (-theta).exp();
            let p_value = binomial_upper_p_value(exceedances as u64, n as u64, nominal)?;
            Ok(ExceedanceRow {
                theta,
                level: lvl,
                exceedances,
                fraction: exceedances as f64 / n as f64,
                exp_neg_theta: nominal,
                p_value,
                reject: p_value < TAIL_TEST_LEVEL,
            })
        })
        .collect()
}

pub fn mc_tail_check(trials: usize, theta_grid: &[f64], runner: &TailRunner) -> Result<ExceedanceTable> {
    if trials < 100 {
        return Err(invalid(format!("tail checks need at least 100 trials, got {trials}")));
    }
    if theta_grid.iter().any(|t| !(*t >= 0.0)) {
        return Err(invalid("theta values must be >= 0"));
    }
    let bound = runner.bound()?;
    let gaps = runner.final_gaps(trials)?;
    let rows = exceedance_table(&gaps, theta_grid, |theta| bound.quantile(theta))?;
    Ok(ExceedanceTable { trials, bound: Some(bound), rows })
}

/// Synthetic variables satisfying `log E exp(uZ) <= σ²u²/(2(1 - uB))` for `0 <= u < 1/B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TailDistribution {
    /// `N(0, σ²)`; satisfies the hypothesis for every `B > 0`.
    Gaussian { sigma: f64 },
    /// `N(0, σ² - B²) + B (E - 1)` with `E ~ Exp(1)`, needs `B <= σ`.
    GaussianPlusShiftedExp { sigma: f64, b: f64 },
}

impl TailDistribution {
    /// Pick the construction used for a given `(σ, B)`: Gaussian when `B` is negligible.
    pub fn matched(sigma: f64, b: f64) -> Result<Self> {
        if !(sigma > 0.0 && b > 0.0) {
            return Err(invalid("need sigma > 0 and B > 0"));
        }
        if b < 1e-6 * sigma {
            Ok(TailDistribution::Gaussian { sigma })
        } else if b <= sigma {
            Ok(TailDistribution::GaussianPlusShiftedExp { sigma, b })
        } else {
            Err(invalid(format!("B = {b} exceeds sigma = {sigma}")))
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            TailDistribution::Gaussian { sigma } => sigma * rng.sample::<f64, _>(StandardNormal),
            TailDistribution::GaussianPlusShiftedExp { sigma, b } => {
                let g: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(Exp1);
                (sigma * sigma - b * b).sqrt() * g + b * (e - 1.0)
            }
        }
    }

    /// `log E exp(uZ)`, finite for `u < 1/B`.
    pub fn log_mgf(&self, u: f64) -> f64 {
        match *self {
            TailDistribution::Gaussian { sigma } => sigma * sigma * u * u / 2.0,
            TailDistribution::GaussianPlusShiftedExp { sigma, b } => {
                (sigma * sigma - b * b) * u * u / 2.0 - u * b - (-u * b).ln_1p()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailInequalityRow {
    pub theta: f64,
    pub threshold: f64,
    pub empirical_tail: f64,
    pub bound: f64,
    pub below: bool,
}

/// `draws` independent samples, reproducible for a given `seed` regardless of thread count.
pub fn sample_tail(dist: TailDistribution, draws: usize, seed: u64) -> Vec<f64> {
    const CHUNK: usize = 65_536;
    (0..draws.div_ceil(CHUNK))
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(c as u64));
            let len = CHUNK.min(draws - c * CHUNK);
            (0..len).map(move |_| dist.sample(&mut rng)).collect::<Vec<_>>()
        })
        .collect()
}

/// Empirical `Pr{Z >= sqrt(2θσ²) + θB}` over `draws` samples against `exp(-θ)`.
pub fn tail_inequality_monte_carlo(
    dist: TailDistribution,
    sigma: f64,
    b: f64,
    thetas: &[f64],
    draws: usize,
    seed: u64,
) -> Result<Vec<TailInequalityRow>> {
    if draws == 0 {
        return Err(invalid("need at least one draw"));
    }
    let samples = sample_tail(dist, draws, seed);
    thetas
        .iter()
        .map(|&theta| {
            let (threshold, bound) = tail_bound_theta(sigma, b, theta)?;
            let hits = samples.iter().filter(|z| **z >= threshold).count();
            let empirical_tail = hits as f64 / draws as f64;
            Ok(TailInequalityRow { theta, threshold, empirical_tail, bound, below: empirical_tail <= bound })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn thm1_terminal_entries_vanish() {
        let s = build_sequences(BoundSource::Thm1, 10, 1.0, 2.0, 1.0, 1.0).unwrap();
        assert_eq!(s.r_hat[10], 0.0);
        assert_eq!(s.p_tilde_sq[10], 0.0);
        assert_relative_eq!(s.coeff(3).c, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(s.coeff(3).d, 4.0 / 9.0, epsilon = 1e-15);
    }

    #[test]
    fn thm2_first_coefficient() {
        let (mu, l) = (0.5, 3.0);
        let s = build_sequences(BoundSource::Thm2, 20, mu, l, 1.0, 1.0).unwrap();
        assert_relative_eq!(s.coeff(1).a, 2.0 * l, max_relative = 1e-15);
    }

    #[test]
    fn recursion_hypotheses_hold() {
        for source in BoundSource::ALL {
            let s = build_sequences(source, 50, 1.0, 4.0, 1.0, 1.0).unwrap();
            for k in &s.coeffs {
                assert!(k.d > 0.0 && k.w >= 0.0 && k.a >= 0.0 && k.c >= 0.0 && k.a_tilde >= 0.0 && k.c_tilde >= 0.0);
            }
            for seq in [&s.p_bar, &s.r_bar, &s.p_tilde_sq, &s.r_tilde_sq, &s.r_hat] {
                assert!(seq.iter().all(|v| v.is_finite() && *v >= 0.0), "{source:?}");
            }
        }
    }

    #[test]
    fn thm1_conditions_all_pass() {
        let s = build_sequences(BoundSource::Thm1, 100, 1.0, 4.0, 1.0, 1.0).unwrap();
        let v = check_conditions(&s);
        assert_eq!(v.len(), 700);
        assert!(v.iter().all(|x| x.pass));
        assert!(terminal_check(&s).pass);
    }

    #[test]
    fn corrupted_r_hat_is_caught() {
        let mut s = build_sequences(BoundSource::Thm1, 100, 1.0, 4.0, 1.0, 1.0).unwrap();
        s.corrupt(Sequence::RHat, 0.01);
        let v = check_conditions(&s);
        assert!(v.iter().any(|x| !x.pass && (x.condition_id == 6 || x.condition_id == 7)));
    }

    #[test]
    fn r_hat_is_monotone_for_every_source() {
        for source in BoundSource::ALL {
            let s = build_sequences(source, 200, 1.0, 8.0, 1.0, 1.0).unwrap();
            assert!(check_conditions(&s).iter().filter(|v| v.condition_id == 5).all(|v| v.pass));
        }
    }

    #[test]
    fn terminal_condition_per_source() {
        for source in BoundSource::ALL {
            let s = build_sequences(source, 100, 1.0, 2.0, 1.0, 1.5).unwrap();
            assert!(terminal_check(&s).pass, "{source:?}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(build_sequences(BoundSource::Thm1, 1, 1.0, 2.0, 1.0, 1.0).is_err());
        assert!(build_sequences(BoundSource::Thm1, 10, 2.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn summary_reports_min_slack() {
        let s = build_sequences(BoundSource::PropOriginal, 30, 1.0, 2.0, 1.0, 1.0).unwrap();
        let sum = summarize(&check_conditions(&s));
        assert_eq!(sum.len(), 7);
        assert!(sum.iter().all(|c| c.failures == 0));
    }

    #[test]
    fn mixture_satisfies_mgf_hypothesis() {
        for &(sigma, b) in &[(1.0, 0.5), (2.0, 1.0), (1.0, 1.0), (1.0, 1e-9)] {
            let dist = TailDistribution::matched(sigma, b).unwrap();
            for i in 0..1000 {
                let u = i as f64 / 1000.0 / b;
                let bound = sigma * sigma * u * u / (2.0 * (1.0 - u * b));
                assert!(dist.log_mgf(u) <= bound * (1.0 + 1e-12) + 1e-15, "sigma={sigma} b={b} u={u}");
            }
        }
        assert!(TailDistribution::matched(1.0, 2.0).is_err());
    }

    #[test]
    fn mixture_has_stated_moments() {
        let dist = TailDistribution::matched(1.0, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
        assert!(m.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.02);
    }

    #[test]
    fn gaussian_tail_below_inequality() {
        let rows = tail_inequality_monte_carlo(TailDistribution::Gaussian { sigma: 1.0 }, 1.0, 1e-9, &[2.0], 200_000, 1).unwrap();
        assert!((rows[0].empirical_tail - 0.0228).abs() < 0.002);
        assert!(rows[0].below);
    }

    #[test]
    fn exceedance_table_at_theta_zero() {
        let rows = exceedance_table(&[1.0, 2.0, 3.0], &[0.0], |_| Ok(0.0)).unwrap();
        assert_eq!(rows[0].exp_neg_theta, 1.0);
        assert_eq!(rows[0].fraction, 1.0);
        assert!(!rows[0].reject);
    }
}
