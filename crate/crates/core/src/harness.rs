//! Parameter sweeps over the horizon `T`, slope fits and bound comparisons.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_for, BoundConstants, BoundSource};
use crate::error::{invalid, Error, Result};
use crate::optimizers::{run, RunOptions};
use crate::problems::{ProblemParams, ProblemSpec};
use crate::schedules::{ScheduleConfig, ScheduleKind};
use crate::stats::{log_log_slope, mean, median, sorted_quantile};

/// Seed stride between consecutive entries of the `T` grid.
pub const SEED_STRIDE: u64 = 1_000_000;

/// Only horizons with `T > REGIME_FACTOR * kappa` enter the slope fit.
pub const REGIME_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemParams,
    pub schedule: ScheduleKind,
    #[serde(rename = "T_grid")]
    pub t_grid: Vec<usize>,
    #[serde(rename = "trials_per_T")]
    pub trials_per_t: usize,
    #[serde(default)]
    pub theta_grid: Vec<f64>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub output_path: Option<String>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t_grid.is_empty() {
            return Err(invalid("T_grid must not be empty"));
        }
        if self.t_grid[0] == 0 || self.t_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("T_grid must be positive and strictly increasing"));
        }
        if self.trials_per_t == 0 {
            return Err(invalid("trials_per_T must be at least 1"));
        }
        if self.theta_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(invalid("theta_grid entries must be finite and >= 0"));
        }
        let max_seed = self.seed(self.t_grid.len() - 1, self.trials_per_t - 1);
        if max_seed.is_none() || self.trials_per_t as u64 > SEED_STRIDE {
            return Err(invalid("base_seed and grid sizes overflow the seed space"));
        }
        self.schedule.validate()
    }

    /// Seed of trial `j` at grid index `i`.
    pub fn seed(&self, i: usize, j: usize) -> Option<u64> {
        (i as u64)
            .checked_mul(SEED_STRIDE)
            .and_then(|s| s.checked_add(j as u64))
            .and_then(|s| s.checked_add(self.base_seed))
    }

    pub fn build(&self) -> Result<(ProblemSpec, ScheduleConfig)> {
        self.validate()?;
        let spec = self.problem.build()?;
        let cfg = ScheduleConfig::new(self.schedule, spec.mu(), spec.kappa())?;
        Ok((spec, cfg))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "T")]
    pub t_max: usize,
    pub mean_gap: f64,
    pub median_gap: f64,
    /// Empirical `(1 - exp(-θ))`-quantile of the final gap, one per θ.
    pub quantile_gaps: Vec<f64>,
    /// `quantile(bound, θ)`, when the schedule has a stated bound.
    pub bound_quantiles: Option<Vec<f64>>,
    /// Fraction of trials whose gap reached the bound quantile.
    pub exceedance: Option<Vec<f64>>,
    pub in_regime: bool,
    pub first_seed: u64,
    #[serde(skip)]
    pub sorted_gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub theta_grid: Vec<f64>,
    pub fitted_slope: Option<f64>,
    pub slope_stderr: Option<f64>,
    pub constants: BoundConstants,
    pub bound_source: Option<BoundSource>,
}

/// Level at which the empirical quantile is compared against `quantile(θ)`.
pub fn theta_level(theta: f64) -> f64 {
    1.0 - (-theta).exp()
}

pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let (spec, schedule) = cfg.build()?;
    let x0 = spec.default_start();
    let constants = BoundConstants { d: spec.diameter(), l: spec.l(), q: spec.noise_radius(), kappa: spec.kappa() };
    let bound_source = BoundSource::for_schedule(&schedule.kind);

    let cells: Vec<(usize, usize)> = (0..cfg.t_grid.len())
        .flat_map(|i| (0..cfg.trials_per_t).map(move |j| (i, j)))
        .collect();
    let gaps: Vec<f64> = cells
        .par_iter()
        .map(|&(i, j)| {
            let t_max = cfg.t_grid[i];
            let seed = cfg.seed(i, j).expect("validated");
            run(&spec, &schedule, t_max, &x0, seed, RunOptions::default())
                .map(|r| r.final_gap)
                .map_err(|e| context(e, format!("trial {j} at T={t_max} (seed {seed})")))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.t_grid.len());
    for (i, chunk) in gaps.chunks(cfg.trials_per_t).enumerate() {
        let t_max = cfg.t_grid[i];
        let mut sorted = chunk.to_vec();
        sorted.sort_by(f64::total_cmp);
        let quantile_gaps = cfg.theta_grid.iter().map(|&th| sorted_quantile(&sorted, theta_level(th))).collect();
        let (bound_quantiles, exceedance) = match bound_source {
            Some(src) => {
                let triple = bound_for(src, &constants, t_max)?;
                let qs: Vec<f64> = cfg.theta_grid.iter().map(|&th| triple.quantile(th)).collect::<Result<_>>()?;
                let ex = qs
                    .iter()
                    .map(|q| sorted.iter().filter(|g| **g >= *q).count() as f64 / sorted.len() as f64)
                    .collect();
                (Some(qs), Some(ex))
            }
            None => (None, None),
        };
        rows.push(SweepRow {
            t_max,
            mean_gap: mean(chunk),
            median_gap: median(&sorted),
            quantile_gaps,
            bound_quantiles,
            exceedance,
            in_regime: t_max as f64 > REGIME_FACTOR * constants.kappa,
            first_seed: cfg.seed(i, 0).expect("validated"),
            sorted_gaps: sorted,
        });
    }

    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.in_regime && r.median_gap > 0.0)
        .map(|r| (r.t_max as f64, r.median_gap))
        .unzip();
    let fit = log_log_slope(&xs, &ys);

    Ok(SweepResult {
        rows,
        theta_grid: cfg.theta_grid.clone(),
        fitted_slope: fit.map(|f| f.slope),
        slope_stderr: fit.and_then(|f| f.slope_stderr),
        constants,
        bound_source,
    })
}

fn context(e: Error, what: String) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::InvalidParameter(format!("{what}: {m}")),
        Error::Infeasible(m) => Error::Infeasible(format!("{what}: {m}")),
        Error::Precondition(m) => Error::Precondition(format!("{what}: {m}")),
        Error::Unsupported(m) => Error::Unsupported(format!("{what}: {m}")),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    #[serde(rename = "T")]
    pub t_max: usize,
    pub theta: Option<f64>,
    pub empirical_quantile: Option<f64>,
    pub bound_quantile: Option<f64>,
    pub exceedance_frac: Option<f64>,
    pub exp_neg_theta: Option<f64>,
    pub median_gap: f64,
    pub mean_gap: f64,
    pub violation: bool,
}

/// One row per `(T, θ)`; with an empty θ grid, one row per `T` holding only gap statistics.
pub fn compare_to_bound(result: &SweepResult, source: BoundSource) -> Result<Vec<ComparisonRow>> {
    let mut out = Vec::new();
    for row in &result.rows {
        if result.theta_grid.is_empty() {
            out.push(ComparisonRow {
                t_max: row.t_max,
                theta: None,
                empirical_quantile: None,
                bound_quantile: None,
                exceedance_frac: None,
                exp_neg_theta: None,
                median_gap: row.median_gap,
                mean_gap: row.mean_gap,
                violation: false,
            });
            continue;
        }
        let triple = bound_for(source, &result.constants, row.t_max)?;
        for (k, &theta) in result.theta_grid.iter().enumerate() {
            let bound = triple.quantile(theta)?;
            let emp = row.quantile_gaps[k];
            let exceed = row.sorted_gaps.iter().filter(|g| **g >= bound).count() as f64 / row.sorted_gaps.len() as f64;
            out.push(ComparisonRow {
                t_max: row.t_max,
                theta: Some(theta),
                empirical_quantile: Some(emp),
                bound_quantile: Some(bound),
                exceedance_frac: Some(exceed),
                exp_neg_theta: Some((-theta).exp()),
                median_gap: row.median_gap,
                mean_gap: row.mean_gap,
                violation: emp > bound,
            });
        }
    }
    Ok(out)
}

/// [`compare_to_bound`] against the schedule's own bound, or gap statistics only when it has none.
pub fn result_table(result: &SweepResult) -> Result<Vec<ComparisonRow>> {
    if let Some(src) = result.bound_source {
        return compare_to_bound(result, src);
    }
    let mut out = Vec::new();
    for row in &result.rows {
        let thetas: Vec<Option<f64>> =
            if result.theta_grid.is_empty() { vec![None] } else { result.theta_grid.iter().copied().map(Some).collect() };
        for (k, theta) in thetas.into_iter().enumerate() {
            out.push(ComparisonRow {
                t_max: row.t_max,
                theta,
                empirical_quantile: theta.map(|_| row.quantile_gaps[k]),
                bound_quantile: None,
                exceedance_frac: None,
                exp_neg_theta: theta.map(|t| (-t).exp()),
                median_gap: row.median_gap,
                mean_gap: row.mean_gap,
                violation: false,
            });
        }
    }
    Ok(out)
}
