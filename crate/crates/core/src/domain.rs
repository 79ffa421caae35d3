//! Points, feasible sets and the closed-form Euclidean prox step.
//!
//! Both algorithms only ever minimize `<g, x> + ||x - x_prev||^2 / (2 gamma)`
//! over the feasible set, which is the projection of `x_prev - gamma * g`.
//! Balls and boxes keep that projection exact.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Vector = DVector<f64>;

/// Membership tolerance used by [`FeasibleSet::contains`] callers.
pub const MEMBERSHIP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeasibleSet {
    Ball {
        #[serde(with = "vector_serde")]
        center: Vector,
        radius: f64,
    },
    Box {
        #[serde(with = "vector_serde")]
        lower: Vector,
        #[serde(with = "vector_serde")]
        upper: Vector,
    },
}

impl FeasibleSet {
    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ball radius must be positive, got {radius}")));
        }
        check_finite(&center, "ball center")?;
        Ok(FeasibleSet::Ball { center, radius })
    }

    /// Ball of the given radius centered at the origin of R^d.
    pub fn origin_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(Vector::zeros(dim), radius)
    }

    pub fn boxed(lower: Vector, upper: Vector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        check_finite(&lower, "box lower")?;
        check_finite(&upper, "box upper")?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(invalid("box lower bound exceeds upper bound"));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    /// `D` such that `sup ||x - y|| <= D` over the set.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
            FeasibleSet::Box { lower, upper } => (upper - lower).norm(),
        }
    }

    pub fn center(&self) -> Vector {
        match self {
            FeasibleSet::Ball { center, .. } => center.clone(),
            FeasibleSet::Box { lower, upper } => (lower + upper) * 0.5,
        }
    }

    pub fn contains(&self, point: &Vector, tol: f64) -> bool {
        if point.len() != self.dim() {
            return false;
        }
        match self {
            FeasibleSet::Ball { center, radius } => (point - center).norm() <= radius + tol,
            FeasibleSet::Box { lower, upper } => point
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(p, (l, u))| *p >= l - tol && *p <= u + tol),
        }
    }

    fn check_dim(&self, point: &Vector) -> Result<()> {
        if point.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: point.len() });
        }
        Ok(())
    }
}

fn check_finite(v: &Vector, what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has non-finite entries")))
    }
}

/// Euclidean projection onto `set`.
pub fn project(set: &FeasibleSet, point: &Vector) -> Result<Vector> {
    set.check_dim(point)?;
    Ok(project_unchecked(set, point))
}

pub(crate) fn project_unchecked(set: &FeasibleSet, point: &Vector) -> Vector {
    match set {
        FeasibleSet::Ball { center, radius } => {
            let offset = point - center;
            let dist = offset.norm();
            // a rescaled point can land a few ulps outside; accepting that slack keeps
            // projection idempotent bit for bit
            if dist <= *radius * (1.0 + 8.0 * f64::EPSILON) {
                point.clone()
            } else {
                offset * (*radius / dist) + center
            }
        }
        FeasibleSet::Box { lower, upper } => {
            Vector::from_iterator(point.len(), point.iter().zip(lower.iter().zip(upper.iter())).map(|(p, (l, u))| p.clamp(*l, *u)))
        }
    }
}

/// Minimizer of `<g, x> + ||x - x_prev||^2 / (2 gamma)` over `set`.
pub fn prox_step(set: &FeasibleSet, x_prev: &Vector, g: &Vector, gamma: f64) -> Result<Vector> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid(format!("step size must be positive, got {gamma}")));
    }
    set.check_dim(x_prev)?;
    set.check_dim(g)?;
    Ok(prox_step_unchecked(set, x_prev, g, gamma))
}

pub(crate) fn prox_step_unchecked(set: &FeasibleSet, x_prev: &Vector, g: &Vector, gamma: f64) -> Vector {
    let step = x_prev - g * gamma;
    project_unchecked(set, &step)
}

/// Serialize vectors as plain float sequences.
pub(crate) mod vector_serde {
    use super::Vector;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Vector, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vector, D::Error> {
        let raw = Vec::<f64>::deserialize(d)?;
        Ok(Vector::from_vec(raw))
    }
}
