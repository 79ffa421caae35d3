//! Step sizes `gamma_t`, averaging factors `alpha_t` and the output weights
//! `w_t = alpha_t * prod_{s > t} (1 - alpha_s)` they induce.
//!
//! Weights are evaluated in closed form. The optimizers apply the recursive
//! running average instead; the two agree up to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    /// `alpha_t = 2/(t+1)`, `gamma_t = 2/(mu (t + 2 kappa))`.
    Thm1,
    /// Equal weights: `alpha_t = 1/t`, `gamma_t = 1/(mu (t + kappa))`.
    PropOriginal,
    /// `gamma_t = 1/(mu (t + kappa))`, last iterate is the output.
    PropInterior,
    /// Accelerated: `alpha_t = 2/(t+1)`, `gamma_t = 1/(mu (2 kappa / t + 1/alpha_t))`.
    Thm2,
    /// `w_t` proportional to `t^r`; uses the `Thm1` step size.
    GeneralizedR { r: f64 },
    /// `alpha_1 = 1`, `alpha_t = alpha`; uses the `Thm1` step size.
    Exponential { alpha: f64 },
}

impl ScheduleKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScheduleKind::Thm1 => "thm1",
            ScheduleKind::PropOriginal => "prop_original",
            ScheduleKind::PropInterior => "prop_interior",
            ScheduleKind::Thm2 => "thm2",
            ScheduleKind::GeneralizedR { .. } => "generalized_r",
            ScheduleKind::Exponential { .. } => "exponential",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ScheduleKind::GeneralizedR { r } if !(r >= 0.0 && r.is_finite()) => {
                Err(invalid(format!("generalized_r needs r >= 0, got {r}")))
            }
            ScheduleKind::Exponential { alpha } if !(alpha > 0.0 && alpha <= 1.0) => {
                Err(invalid(format!("exponential needs alpha in (0, 1], got {alpha}")))
            }
            _ => Ok(()),
        }
    }

    /// True for schedules whose output is the running weighted average.
    pub fn averages(&self) -> bool {
        !matches!(self, ScheduleKind::PropInterior)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleConfig {
    pub kind: ScheduleKind,
    pub mu: f64,
    pub kappa: f64,
}

fn check_t(t: usize) -> Result<()> {
    if t == 0 {
        Err(invalid("iteration index starts at 1"))
    } else {
        Ok(())
    }
}

impl ScheduleConfig {
    pub fn new(kind: ScheduleKind, mu: f64, kappa: f64) -> Result<Self> {
        kind.validate()?;
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        if !(kappa >= 1.0 && kappa.is_finite()) {
            return Err(invalid(format!("kappa must be >= 1, got {kappa}")));
        }
        Ok(ScheduleConfig { kind, mu, kappa })
    }

    pub fn l(&self) -> f64 {
        self.mu * self.kappa
    }

    pub fn alpha(&self, t: usize) -> Result<f64> {
        check_t(t)?;
        let tf = t as f64;
        Ok(match self.kind {
            ScheduleKind::Thm1 | ScheduleKind::Thm2 => 2.0 / (tf + 1.0),
            ScheduleKind::PropOriginal => 1.0 / tf,
            ScheduleKind::PropInterior => 1.0,
            ScheduleKind::GeneralizedR { r } => tf.powf(r) / (1..=t).map(|s| (s as f64).powf(r)).sum::<f64>(),
            ScheduleKind::Exponential { alpha } => {
                if t == 1 {
                    1.0
                } else {
                    alpha
                }
            }
        })
    }

    pub fn gamma(&self, t: usize) -> Result<f64> {
        check_t(t)?;
        let tf = t as f64;
        let (mu, kappa) = (self.mu, self.kappa);
        Ok(match self.kind {
            ScheduleKind::Thm1 | ScheduleKind::GeneralizedR { .. } | ScheduleKind::Exponential { .. } => {
                2.0 / (mu * (tf + 2.0 * kappa))
            }
            ScheduleKind::PropOriginal | ScheduleKind::PropInterior => 1.0 / (mu * (tf + kappa)),
            ScheduleKind::Thm2 => {
                let alpha = 2.0 / (tf + 1.0);
                1.0 / (mu * (2.0 * kappa / tf + 1.0 / alpha))
            }
        })
    }

    /// `(alpha_t, gamma_t)` for `t = 1..=t_max`, computed in one pass.
    pub fn table(&self, t_max: usize) -> Result<Vec<(f64, f64)>> {
        let mut out = Vec::with_capacity(t_max);
        let mut power_sum = 0.0;
        for t in 1..=t_max {
            let alpha = match self.kind {
                ScheduleKind::GeneralizedR { r } => {
                    let p = (t as f64).powf(r);
                    power_sum += p;
                    p / power_sum
                }
                _ => self.alpha(t)?,
            };
            out.push((alpha, self.gamma(t)?));
        }
        Ok(out)
    }

    /// Fails if the per-iteration inequality the optimizer relies on would not
    /// apply: `gamma_t L < 1`, or `gamma_t (alpha_t L + mu) < 1` for `Thm2`.
    pub fn check_preconditions(&self, t_max: usize) -> Result<()> {
        let l = self.l();
        for (i, (alpha, gamma)) in self.table(t_max)?.into_iter().enumerate() {
            let t = i + 1;
            let (value, what) = match self.kind {
                ScheduleKind::Thm2 => (gamma * (alpha * l + self.mu), "gamma_t (alpha_t L + mu)"),
                _ => (gamma * l, "gamma_t L"),
            };
            if !(value < 1.0) {
                return Err(Error::Precondition(format!("{what} = {value} >= 1 at t = {t}")));
            }
        }
        Ok(())
    }
}

/// Output weights `w_1..w_T`, summing to one.
pub fn weights(kind: &ScheduleKind, t_max: usize) -> Result<Vec<f64>> {
    kind.validate()?;
    if t_max == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let tt = t_max as f64;
    Ok(match *kind {
        ScheduleKind::Thm1 | ScheduleKind::Thm2 => {
            (1..=t_max).map(|t| 2.0 * t as f64 / (tt * (tt + 1.0))).collect()
        }
        ScheduleKind::PropOriginal => vec![1.0 / tt; t_max],
        ScheduleKind::PropInterior => {
            let mut w = vec![0.0; t_max];
            w[t_max - 1] = 1.0;
            w
        }
        ScheduleKind::GeneralizedR { r } => {
            let powers: Vec<f64> = (1..=t_max).map(|t| (t as f64).powf(r)).collect();
            let total: f64 = powers.iter().sum();
            powers.into_iter().map(|p| p / total).collect()
        }
        ScheduleKind::Exponential { alpha } => (1..=t_max)
            .map(|t| {
                if t == 1 {
                    (1.0 - alpha).powi((t_max - 1) as i32)
                } else {
                    alpha * (1.0 - alpha).powi((t_max - t) as i32)
                }
            })
            .collect(),
    })
}

/// Variance of `sum_t w_t Z_t` for independent unit-variance `Z_t`, i.e. `sum_t w_t^2`.
pub fn averaged_variance(kind: &ScheduleKind, t_max: usize) -> Result<f64> {
    Ok(weights(kind, t_max)?.iter().map(|w| w * w).sum())
}

/// Closed-form or asymptotic approximation of [`averaged_variance`]:
/// `2(2T+1)/(3T(T+1))` for the `2/(t+1)` schemes, `(1+r)^2/((1+2r)T)` for
/// `GeneralizedR`, `alpha/(2-alpha) (1 + (1-alpha)^(2T-1))` for `Exponential`.
pub fn averaged_variance_approx(kind: &ScheduleKind, t_max: usize) -> Result<f64> {
    kind.validate()?;
    if t_max == 0 {
        return Err(invalid("horizon must be at least 1"));
    }
    let tt = t_max as f64;
    Ok(match *kind {
        ScheduleKind::Thm1 | ScheduleKind::Thm2 => 2.0 * (2.0 * tt + 1.0) / (3.0 * tt * (tt + 1.0)),
        ScheduleKind::PropOriginal => 1.0 / tt,
        ScheduleKind::PropInterior => 1.0,
        ScheduleKind::GeneralizedR { r } => (1.0 + r).powi(2) / ((1.0 + 2.0 * r) * tt),
        ScheduleKind::Exponential { alpha } => {
            alpha / (2.0 - alpha) * (1.0 + (1.0 - alpha).powi(2 * t_max as i32 - 1))
        }
    })
}

/// Number of equally weighted samples with the same averaged variance.
pub fn effective_tail_samples(kind: &ScheduleKind, t_max: usize) -> Result<f64> {
    Ok(1.0 / averaged_variance(kind, t_max)?)
}

/// Partial harmonic sum `sum_{s = t+1}^{T} 1/s`.
pub fn log_tilde(t_max: usize, t: usize) -> Result<f64> {
    if t > t_max {
        return Err(invalid(format!("log_tilde needs t <= T, got t={t}, T={t_max}")));
    }
    // smallest terms first
    Ok((t + 1..=t_max).rev().map(|s| 1.0 / s as f64).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(kind: ScheduleKind, mu: f64, kappa: f64) -> ScheduleConfig {
        ScheduleConfig::new(kind, mu, kappa).unwrap()
    }

    #[test]
    fn thm1_values() {
        let c = cfg(ScheduleKind::Thm1, 1.0, 2.0);
        assert_eq!(c.alpha(1).unwrap(), 1.0);
        assert_relative_eq!(c.gamma(1).unwrap(), 2.0 / 5.0);
        assert_relative_eq!(c.gamma(6).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn thm2_values() {
        let c = cfg(ScheduleKind::Thm2, 1.0, 2.0);
        assert_relative_eq!(c.alpha(3).unwrap(), 0.5);
        assert_relative_eq!(c.gamma(3).unwrap(), 0.3, epsilon = 1e-15);
    }

    #[test]
    fn t_zero_rejected() {
        let c = cfg(ScheduleKind::Thm1, 1.0, 2.0);
        assert!(c.alpha(0).is_err());
        assert!(c.gamma(0).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(ScheduleConfig::new(ScheduleKind::Thm1, 1.0, 0.5).is_err());
        assert!(ScheduleConfig::new(ScheduleKind::Thm1, 0.0, 2.0).is_err());
        assert!(ScheduleConfig::new(ScheduleKind::GeneralizedR { r: -1.0 }, 1.0, 2.0).is_err());
        assert!(ScheduleConfig::new(ScheduleKind::Exponential { alpha: 0.0 }, 1.0, 2.0).is_err());
    }

    #[test]
    fn weight_examples() {
        let w = weights(&ScheduleKind::Thm1, 3).unwrap();
        for (a, b) in w.iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(weights(&ScheduleKind::PropOriginal, 4).unwrap(), vec![0.25; 4]);
        let r0 = weights(&ScheduleKind::GeneralizedR { r: 0.0 }, 7).unwrap();
        let eq = weights(&ScheduleKind::PropOriginal, 7).unwrap();
        for (a, b) in r0.iter().zip(&eq) {
            assert_relative_eq!(*a, *b, epsilon = 1e-15);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        let kinds = [
            ScheduleKind::Thm1,
            ScheduleKind::Thm2,
            ScheduleKind::PropOriginal,
            ScheduleKind::PropInterior,
            ScheduleKind::GeneralizedR { r: 1.5 },
            ScheduleKind::Exponential { alpha: 0.3 },
            ScheduleKind::Exponential { alpha: 1.0 },
        ];
        for kind in kinds {
            for t_max in [1, 2, 10, 1000] {
                let w = weights(&kind, t_max).unwrap();
                assert_eq!(w.len(), t_max);
                assert!(w.iter().all(|x| *x >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12, "{kind:?} T={t_max}");
            }
        }
    }

    #[test]
    fn product_form_matches_closed_form() {
        // w_t = alpha_t prod_{s>t} (1 - alpha_s) evaluated literally
        for kind in [
            ScheduleKind::Thm1,
            ScheduleKind::PropOriginal,
            ScheduleKind::GeneralizedR { r: 2.0 },
            ScheduleKind::Exponential { alpha: 0.25 },
        ] {
            let c = cfg(kind, 1.0, 3.0);
            let t_max = 40;
            let alphas: Vec<f64> = (1..=t_max).map(|t| c.alpha(t).unwrap()).collect();
            let closed = weights(&kind, t_max).unwrap();
            for t in 1..=t_max {
                let prod: f64 = alphas[t..].iter().map(|a| 1.0 - a).product();
                assert_relative_eq!(alphas[t - 1] * prod, closed[t - 1], max_relative = 1e-12, epsilon = 1e-300);
            }
        }
    }

    #[test]
    fn table_matches_pointwise() {
        let c = cfg(ScheduleKind::GeneralizedR { r: 1.3 }, 0.5, 4.0);
        for (i, (a, g)) in c.table(50).unwrap().into_iter().enumerate() {
            assert_relative_eq!(a, c.alpha(i + 1).unwrap(), max_relative = 1e-13);
            assert_eq!(g, c.gamma(i + 1).unwrap());
        }
    }

    #[test]
    fn averaged_variance_examples() {
        assert_relative_eq!(averaged_variance(&ScheduleKind::Thm1, 10).unwrap(), 42.0 / 330.0, epsilon = 1e-15);
        assert_relative_eq!(averaged_variance(&ScheduleKind::PropOriginal, 10).unwrap(), 0.1, epsilon = 1e-15);
        let exact = averaged_variance(&ScheduleKind::GeneralizedR { r: 2.0 }, 1000).unwrap();
        assert!((exact / 0.0018 - 1.0).abs() < 0.02);
        let approx = averaged_variance_approx(&ScheduleKind::GeneralizedR { r: 2.0 }, 1000).unwrap();
        assert_relative_eq!(approx, 0.0018, epsilon = 1e-15);
    }

    #[test]
    fn effective_tail_sample_limits() {
        let t_max = 100_000;
        let ratio = effective_tail_samples(&ScheduleKind::Thm1, t_max).unwrap() / t_max as f64;
        assert!((ratio - 0.75).abs() < 1e-4);
        let e = effective_tail_samples(&ScheduleKind::Exponential { alpha: 0.5 }, 1000).unwrap();
        assert!((e - 3.0).abs() < 1e-9);
        assert_relative_eq!(effective_tail_samples(&ScheduleKind::PropOriginal, 100).unwrap(), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn log_tilde_examples() {
        assert_eq!(log_tilde(7, 7).unwrap(), 0.0);
        assert_relative_eq!(log_tilde(4, 1).unwrap(), 13.0 / 12.0, epsilon = 1e-15);
        assert!(log_tilde(100, 1).unwrap() <= (100f64).ln());
        assert!(log_tilde(3, 4).is_err());
        for t_max in [1usize, 5, 100, 2000] {
            for t in 1..=t_max {
                let lt = log_tilde(t_max, t).unwrap();
                assert!(lt <= (t_max as f64 / t as f64).ln() + 1e-15);
                if t < t_max {
                    assert!(lt <= 1.0 / (t + 1) as f64 + (t_max as f64 / (t + 1) as f64).ln() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn thm1_telescoping_identity() {
        for kappa in [1.0, 2.5, 8.0, 32.0] {
            let mu = 0.7;
            let c = cfg(ScheduleKind::Thm1, mu, kappa);
            let t_max = 500;
            let w = weights(&ScheduleKind::Thm1, t_max).unwrap();
            let l = mu * kappa;
            for t in 1..=t_max {
                let g = c.gamma(t).unwrap();
                let prev = if t == 1 { 0.0 } else { w[t - 2] / (2.0 * c.gamma(t - 1).unwrap()) };
                let lhs = w[t - 1] * (1.0 - g * mu) / (2.0 * g) - prev;
                assert!(lhs <= w[t - 1] * l / (2.0 * t as f64) * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn precondition_guards_hold() {
        for kind in [ScheduleKind::Thm1, ScheduleKind::PropOriginal, ScheduleKind::PropInterior, ScheduleKind::Thm2] {
            for kappa in [1.0, 1.5, 4.0, 100.0, 1e4] {
                cfg(kind, 0.3, kappa).check_preconditions(2000).unwrap();
            }
        }
    }
}
