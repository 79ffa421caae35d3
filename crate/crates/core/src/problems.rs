//! Synthetic strongly convex quadratics `f(x) = (x - x*)^T H (x - x*) / 2`
//! with a bounded, mean-zero stochastic gradient oracle.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{FeasibleSet, Vector, MEMBERSHIP_TOL};
use crate::error::{invalid, Error, Result};

/// Problem description as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    pub d: usize,
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "Q")]
    pub q: f64,
    #[serde(default)]
    pub rotation_seed: u64,
    #[serde(default)]
    pub interior: bool,
    pub feasible: FeasibleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FeasibleSpec {
    /// Centered at the origin unless `center` is given.
    Ball {
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center: Option<Vec<f64>>,
    },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSpec {
    pub fn build(&self, dim: usize) -> Result<FeasibleSet> {
        match self {
            FeasibleSpec::Ball { radius, center } => {
                let center = match center {
                    Some(c) if c.len() != dim => {
                        return Err(Error::DimensionMismatch { expected: dim, got: c.len() })
                    }
                    Some(c) => Vector::from_column_slice(c),
                    None => Vector::zeros(dim),
                };
                FeasibleSet::ball(center, *radius)
            }
            FeasibleSpec::Box { lower, upper } => {
                if lower.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: lower.len() });
                }
                FeasibleSet::boxed(Vector::from_column_slice(lower), Vector::from_column_slice(upper))
            }
        }
    }
}

impl ProblemParams {
    pub fn build(&self) -> Result<ProblemSpec> {
        let feasible = self.feasible.build(self.d)?;
        make_problem(self.d, self.mu, self.l, self.rotation_seed, feasible, self.q, self.interior)
    }
}

/// A fully instantiated quadratic with known constants.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub params: ProblemParams,
    pub eigenvalues: Vec<f64>,
    /// Orthogonal basis; column `i` is the eigenvector for `eigenvalues[i]`.
    pub rotation: DMatrix<f64>,
    pub hessian: DMatrix<f64>,
    pub x_star: Vector,
    pub feasible: FeasibleSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub g_true: Vector,
    pub g_noisy: Vector,
    pub delta: Vector,
}

pub fn make_problem(
    d: usize,
    mu: f64,
    l: f64,
    rotation_seed: u64,
    feasible: FeasibleSet,
    q: f64,
    interior: bool,
) -> Result<ProblemSpec> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(mu > 0.0 && mu.is_finite() && l.is_finite()) {
        return Err(invalid(format!("need 0 < mu and finite L, got mu={mu}, L={l}")));
    }
    if mu > l {
        return Err(invalid(format!("mu={mu} exceeds L={l}")));
    }
    if d == 1 && mu != l {
        return Err(invalid("a one-dimensional quadratic needs mu == L"));
    }
    if !(q >= 0.0 && q.is_finite()) {
        return Err(invalid(format!("noise radius must be >= 0, got {q}")));
    }
    if feasible.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: feasible.dim() });
    }

    let eigenvalues: Vec<f64> = if d == 1 {
        vec![mu]
    } else {
        (0..d).map(|i| mu + (l - mu) * i as f64 / (d - 1) as f64).collect()
    };
    // exact endpoints regardless of rounding in the interpolation
    let mut eigenvalues = eigenvalues;
    eigenvalues[d - 1] = l;

    let rotation = random_rotation(d, rotation_seed);
    let diag = DMatrix::from_diagonal(&Vector::from_column_slice(&eigenvalues));
    let hessian = &rotation * diag * rotation.transpose();

    let x_star = if interior {
        feasible.center()
    } else {
        boundary_point(&feasible)
    };

    let feasible_spec = match &feasible {
        FeasibleSet::Ball { center, radius } => FeasibleSpec::Ball {
            radius: *radius,
            center: if center.iter().all(|c| *c == 0.0) { None } else { Some(center.iter().copied().collect()) },
        },
        FeasibleSet::Box { lower, upper } => FeasibleSpec::Box {
            lower: lower.iter().copied().collect(),
            upper: upper.iter().copied().collect(),
        },
    };

    Ok(ProblemSpec {
        params: ProblemParams { d, mu, l, q, rotation_seed, interior, feasible: feasible_spec },
        eigenvalues,
        rotation,
        hessian,
        x_star,
        feasible,
    })
}

fn boundary_point(set: &FeasibleSet) -> Vector {
    match set {
        FeasibleSet::Ball { center, radius } => {
            let mut p = center.clone();
            p[0] += radius;
            p
        }
        FeasibleSet::Box { upper, .. } => {
            let mut p = set.center();
            p[0] = upper[0];
            p
        }
    }
}

/// Q factor of a seeded Gaussian matrix.
fn random_rotation(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    gauss.qr().q()
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.params.d
    }

    pub fn mu(&self) -> f64 {
        self.params.mu
    }

    pub fn l(&self) -> f64 {
        self.params.l
    }

    pub fn kappa(&self) -> f64 {
        self.params.l / self.params.mu
    }

    pub fn noise_radius(&self) -> f64 {
        self.params.q
    }

    pub fn diameter(&self) -> f64 {
        self.feasible.diameter()
    }

    /// Coordinates of `x - x*` in the eigenbasis.
    fn eigen_coords(&self, x: &Vector) -> Vector {
        self.rotation.tr_mul(&(x - &self.x_star))
    }

    pub fn eval_f(&self, x: &Vector) -> f64 {
        let z = self.eigen_coords(x);
        0.5 * z.iter().zip(&self.eigenvalues).map(|(zi, lam)| lam * zi * zi).sum::<f64>()
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let mut z = self.eigen_coords(x);
        for (zi, lam) in z.iter_mut().zip(&self.eigenvalues) {
            *zi *= lam;
        }
        &self.rotation * z
    }

    /// Draw `G(x, xi) = g(x) + delta` with `delta` uniform in direction and
    /// radius `u * Q`, `u ~ U[0, 1)`.
    pub fn sample_gradient(&self, x: &Vector, rng: &mut impl Rng) -> GradientSample {
        let g_true = self.gradient(x);
        let delta = sample_noise(self.dim(), self.noise_radius(), rng);
        let g_noisy = &g_true + &delta;
        GradientSample { g_true, g_noisy, delta }
    }

    /// A feasible starting point away from `x*`: the antipode of `x*` on a
    /// ball, the lower corner of a box.
    pub fn default_start(&self) -> Vector {
        match &self.feasible {
            FeasibleSet::Ball { center, radius } => {
                let mut p = center.clone();
                if self.params.interior {
                    p[0] += radius;
                } else {
                    p[0] -= radius;
                }
                p
            }
            FeasibleSet::Box { lower, .. } => lower.clone(),
        }
    }

    pub fn is_feasible(&self, x: &Vector) -> bool {
        self.feasible.contains(x, MEMBERSHIP_TOL)
    }
}

pub(crate) fn sample_noise(dim: usize, radius: f64, rng: &mut impl Rng) -> Vector {
    let mut dir = loop {
        let z = Vector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = z.norm();
        if n > 0.0 {
            break z / n;
        }
    };
    let u: f64 = rng.random();
    if radius == 0.0 {
        return Vector::zeros(dim);
    }
    dir *= u * radius;
    while dir.norm() > radius {
        dir *= 1.0 - 2.0 * f64::EPSILON;
    }
    dir
}
