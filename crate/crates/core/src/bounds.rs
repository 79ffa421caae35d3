//! High-probability bound triples `(K̄, K̃, K̂)`.
//!
//! Each triple induces the level `K̄ + sqrt(2θ) K̃ + θ K̂` that the optimality
//! gap exceeds with probability at most `exp(-θ)`. Constants are evaluated
//! exactly as stated for each schedule; nothing is folded into big-O.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::schedules::ScheduleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundSource {
    Thm1,
    PropOriginal,
    PropInterior,
    Thm2,
}

impl BoundSource {
    pub const ALL: [BoundSource; 4] =
        [BoundSource::Thm1, BoundSource::PropOriginal, BoundSource::PropInterior, BoundSource::Thm2];

    pub fn name(&self) -> &'static str {
        match self {
            BoundSource::Thm1 => "thm1",
            BoundSource::PropOriginal => "prop_original",
            BoundSource::PropInterior => "prop_interior",
            BoundSource::Thm2 => "thm2",
        }
    }

    pub fn for_schedule(kind: &ScheduleKind) -> Option<BoundSource> {
        match kind {
            ScheduleKind::Thm1 => Some(BoundSource::Thm1),
            ScheduleKind::PropOriginal => Some(BoundSource::PropOriginal),
            ScheduleKind::PropInterior => Some(BoundSource::PropInterior),
            ScheduleKind::Thm2 => Some(BoundSource::Thm2),
            _ => None,
        }
    }

    pub fn schedule(&self) -> ScheduleKind {
        match self {
            BoundSource::Thm1 => ScheduleKind::Thm1,
            BoundSource::PropOriginal => ScheduleKind::PropOriginal,
            BoundSource::PropInterior => ScheduleKind::PropInterior,
            BoundSource::Thm2 => ScheduleKind::Thm2,
        }
    }
}

impl std::str::FromStr for BoundSource {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        BoundSource::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown source `{s}` (expected thm1, prop_original, prop_interior or thm2)"))
    }
}

/// Problem constants a bound depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundTriple {
    pub k_bar: f64,
    pub k_tilde: f64,
    pub k_hat: f64,
    pub source: BoundSource,
}

impl BoundTriple {
    /// `K̄ + sqrt(2θ) K̃ + θ K̂`.
    pub fn quantile(&self, theta: f64) -> Result<f64> {
        quantile(self, theta)
    }
}

fn check_inputs(d: f64, l: f64, q: f64, kappa: f64, t_max: usize) -> Result<()> {
    if t_max == 0 {
        return Err(invalid("bound horizon T must be at least 1"));
    }
    if !(kappa >= 1.0 && kappa.is_finite()) {
        return Err(invalid(format!("kappa must be >= 1, got {kappa}")));
    }
    if !(d > 0.0 && d.is_finite() && l > 0.0 && l.is_finite()) {
        return Err(invalid(format!("D and L must be positive, got D={d}, L={l}")));
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(invalid(format!("Q must be >= 0, got {q}")));
    }
    Ok(())
}

pub fn bound_thm1(d: f64, l: f64, q: f64, kappa: f64, t_max: usize) -> Result<BoundTriple> {
    check_inputs(d, l, q, kappa, t_max)?;
    let t = t_max as f64;
    let q2 = q * q;
    let sqrt2 = std::f64::consts::SQRT_2;
    Ok(BoundTriple {
        k_bar: d * d * l / t + 2.0 * kappa * q2 / (l * t),
        k_tilde: 4.0 * d * q * (kappa + 1.0) / t.powf(1.5)
            + 2.0 * sqrt2 * kappa * q2 / (l * t)
            + 4.0 * sqrt2 * kappa.powf(1.5) * q2 * (1.0 + t.ln()).sqrt() / (l * t.powf(1.5)),
        k_hat: 10.0 * kappa * q2 / (l * t),
        source: BoundSource::Thm1,
    })
}

pub fn bound_prop_original(d: f64, l: f64, q: f64, kappa: f64, t_max: usize) -> Result<BoundTriple> {
    check_inputs(d, l, q, kappa, t_max)?;
    let t = t_max as f64;
    let q2 = q * q;
    let log_term = 1.0 + t.ln();
    Ok(BoundTriple {
        k_bar: l * d * d / (2.0 * t) + kappa * q2 / (2.0 * l * t) * log_term,
        k_tilde: d * q * (kappa + 1.0).sqrt() / t + kappa * q2 / (l * t) * log_term.sqrt(),
        k_hat: 6.0 * kappa * q2 / (l * t),
        source: BoundSource::PropOriginal,
    })
}

pub fn bound_prop_interior(d: f64, l: f64, q: f64, kappa: f64, t_max: usize) -> Result<BoundTriple> {
    check_inputs(d, l, q, kappa, t_max)?;
    let t = t_max as f64;
    let q2 = q * q;
    let k2 = kappa * kappa;
    let tk = t + kappa;
    let log_term = 1.0 + t.ln();
    Ok(BoundTriple {
        k_bar: d * d * l * (kappa + 1.0).powi(2) / (2.0 * tk * tk) + k2 * q2 * (t + kappa * log_term) / (2.0 * l * tk * tk),
        k_tilde: d * q * (kappa + 1.0).powi(2) / (std::f64::consts::SQRT_2 * tk.powf(1.5))
            + k2 * q2 / (2.0 * l * tk)
            + k2 * q2 * (kappa * t * log_term).sqrt() / (2.0 * l * tk * tk),
        k_hat: 6.0 * k2 * q2 / (l * tk),
        source: BoundSource::PropInterior,
    })
}

pub fn bound_thm2(d: f64, l: f64, q: f64, kappa: f64, t_max: usize) -> Result<BoundTriple> {
    check_inputs(d, l, q, kappa, t_max)?;
    let t = t_max as f64;
    let q2 = q * q;
    Ok(BoundTriple {
        k_bar: 2.0 * d * d * l / (t * t) + 2.0 * kappa * q2 / (l * t),
        k_tilde: (20.0 * kappa).sqrt() * d * q / t.powf(1.5) + 10f64.sqrt() * kappa * q2 / (2.0 * l * t),
        k_hat: 8.0 * kappa * q2 / (l * t),
        source: BoundSource::Thm2,
    })
}

pub fn bound_for(source: BoundSource, c: &BoundConstants, t_max: usize) -> Result<BoundTriple> {
    let f = match source {
        BoundSource::Thm1 => bound_thm1,
        BoundSource::PropOriginal => bound_prop_original,
        BoundSource::PropInterior => bound_prop_interior,
        BoundSource::Thm2 => bound_thm2,
    };
    f(c.d, c.l, c.q, c.kappa, t_max)
}

pub fn quantile(bt: &BoundTriple, theta: f64) -> Result<f64> {
    if !(theta >= 0.0) {
        return Err(invalid(format!("theta must be >= 0, got {theta}")));
    }
    Ok(bt.k_bar + (2.0 * theta).sqrt() * bt.k_tilde + theta * bt.k_hat)
}

fn check_tail_inputs(sigma: f64, b: f64) -> Result<()> {
    if !(sigma > 0.0 && b > 0.0) {
        return Err(invalid(format!("need sigma > 0 and B > 0, got sigma={sigma}, B={b}")));
    }
    Ok(())
}

/// `exp(-ε² / (2σ² + 2εB))`, a bound on `Pr{Z >= ε}` when
/// `log E exp(uZ) <= σ²u² / (2(1 - uB))` for `0 <= u < 1/B`.
pub fn tail_bound_eps(sigma: f64, b: f64, epsilon: f64) -> Result<f64> {
    check_tail_inputs(sigma, b)?;
    if !(epsilon >= 0.0) {
        return Err(invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    Ok((-epsilon * epsilon / (2.0 * sigma * sigma + 2.0 * epsilon * b)).exp())
}

/// The θ-parameterized form: returns `(threshold, bound)` with
/// `threshold = sqrt(2θσ²) + θB` and `bound = exp(-θ)`.
pub fn tail_bound_theta(sigma: f64, b: f64, theta: f64) -> Result<(f64, f64)> {
    check_tail_inputs(sigma, b)?;
    if !(theta >= 0.0) {
        return Err(invalid(format!("theta must be >= 0, got {theta}")));
    }
    Ok(((2.0 * theta * sigma * sigma).sqrt() + theta * b, (-theta).exp()))
}

/// Exact Chernoff exponent `sup_u { uε - σ²u²/(2(1 - uB)) }`.
///
/// The ε-form above relaxes this to `ε²/(2σ² + 2εB)`; the θ-form is exact
/// for it, so `chernoff_exponent(threshold(θ)) == θ`.
pub fn chernoff_exponent(sigma: f64, b: f64, epsilon: f64) -> Result<f64> {
    check_tail_inputs(sigma, b)?;
    if !(epsilon >= 0.0) {
        return Err(invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let s2 = sigma * sigma;
    Ok(epsilon * epsilon / (epsilon * b + s2 + sigma * (s2 + 2.0 * epsilon * b).sqrt()))
}
