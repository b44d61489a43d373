//! Finite-rank symmetric perturbations `K(w)` of the ℰ-metric.
//!
//! All vectors live in the ℰ-orthonormal coordinates of
//! [`EsSpace`](crate::spectral::EsSpace), so ℰ inner products are dot products.
//! Band-limited fields are smooth, so every vector here is an admissible
//! target for the perturbation class.

use std::f64::consts::E;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::FunctionalContext;
use crate::spectral::ExtendedPoint;

/// Strict bound on `sup_w ‖K(w)‖`.
pub const NORM_GATE: f64 = 0.5;

/// `coef · (w, right) · left`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankOneTerm {
    pub coef: f64,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// `K(w) = Σ coef_i (w, right_i) left_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteRankOperator {
    pub dim: usize,
    pub terms: Vec<RankOneTerm>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl FiniteRankOperator {
    pub fn zero(dim: usize) -> Self {
        Self { dim, terms: vec![] }
    }

    /// A symmetric operator with `K(x) = y`.
    ///
    /// With `(x, y) ≠ 0` this is `K(w) = (w, y) y / (x, y)`. Otherwise it is
    /// `K(w) = [(w, ξ) y + (w, y) ξ] / (x, ξ)` with `ξ = x`.
    pub fn hitting(x: &DVector<f64>, y: &DVector<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Domain("x and y have different dimensions".into()));
        }
        let xx = x.norm_squared();
        if xx == 0.0 {
            return Err(Error::Domain("hitting operator needs x ≠ 0".into()));
        }
        let (xs, ys) = (x.as_slice().to_vec(), y.as_slice().to_vec());
        let xy = x.dot(y);
        // relative threshold: below it the rank-one formula loses all precision
        let terms = if xy.abs() > 1e-12 * xx.sqrt() * y.norm() {
            vec![RankOneTerm {
                coef: 1.0 / xy,
                left: ys.clone(),
                right: ys,
            }]
        } else {
            vec![
                RankOneTerm {
                    coef: 1.0 / xx,
                    left: ys.clone(),
                    right: xs.clone(),
                },
                RankOneTerm {
                    coef: 1.0 / xx,
                    left: xs,
                    right: ys,
                },
            ]
        };
        Ok(Self { dim: x.len(), terms })
    }

    /// `Σ c_i (w, y_i) y_i`, symmetric by construction.
    pub fn symmetric_sum(pairs: &[(f64, DVector<f64>)]) -> Result<Self> {
        let dim = pairs.first().map(|(_, y)| y.len()).unwrap_or(0);
        if pairs.iter().any(|(_, y)| y.len() != dim) {
            return Err(Error::Domain("vectors of mixed dimension".into()));
        }
        Ok(Self {
            dim,
            terms: pairs
                .iter()
                .map(|(c, y)| RankOneTerm {
                    coef: *c,
                    left: y.as_slice().to_vec(),
                    right: y.as_slice().to_vec(),
                })
                .collect(),
        })
    }

    pub fn apply(&self, w: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for t in &self.terms {
            let c = t.coef * dot(&t.right, w.as_slice());
            out.iter_mut().zip(&t.left).for_each(|(o, l)| *o += c * l);
        }
        out
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for t in &self.terms {
            let l = DVector::from_column_slice(&t.left);
            let r = DVector::from_column_slice(&t.right);
            m += (l * r.transpose()) * t.coef;
        }
        m
    }

    /// `Σ |coef| ‖left‖ ‖right‖ ≥ ‖K‖`.
    pub fn norm_bound(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef.abs() * norm(&t.left) * norm(&t.right))
            .sum()
    }

    /// Largest `|(Ku, v) - (u, Kv)|` relative to the operator scale.
    pub fn symmetry_defect(&self) -> f64 {
        let m = self.matrix();
        (&m - m.transpose()).abs().max()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|t| RankOneTerm {
                    coef: t.coef * factor,
                    ..t.clone()
                })
                .collect(),
        }
    }
}

/// `ρ(t) = e^{-1/(1-t²)}` for `|t| < 1`, zero otherwise; `max ρ = e^{-1}`.
pub fn bump_profile(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

/// One bump map `ρ(‖w - center‖) k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub operator: FiniteRankOperator,
}

/// `K(w) = [e^{-‖w‖²}] Σ_i ρ(‖w - w_i‖) k_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMap {
    pub dim: usize,
    pub bumps: Vec<Bump>,
    /// Apply the global factor `e^{-‖w‖²}`.
    pub gaussian: bool,
}

impl PerturbationMap {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            bumps: vec![],
            gaussian: false,
        }
    }

    pub fn single(center: &DVector<f64>, operator: FiniteRankOperator, gaussian: bool) -> Result<Self> {
        if center.len() != operator.dim {
            return Err(Error::Domain("center and operator dimensions differ".into()));
        }
        Ok(Self {
            dim: center.len(),
            bumps: vec![Bump {
                center: center.as_slice().to_vec(),
                operator,
            }],
            gaussian,
        })
    }

    /// Random symmetric bumps scaled so that the norm bound equals `target`.
    ///
    /// Centers are drawn uniformly from the cube `|w_j| ≤ spread` around
    /// `around`; each operator is a rank-`rank` sum of random unit directions.
    pub fn random(
        around: &DVector<f64>,
        count: usize,
        rank: usize,
        spread: f64,
        target: f64,
        seed: u64,
    ) -> Result<Self> {
        let dim = around.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut bumps = Vec::with_capacity(count);
        for _ in 0..count {
            let center = around + DVector::from_fn(dim, |_, _| rng.gen_range(-spread..=spread));
            let pairs: Vec<(f64, DVector<f64>)> = (0..rank)
                .map(|_| {
                    let y = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
                    (rng.gen_range(-1.0..1.0), y.normalize())
                })
                .collect();
            bumps.push(Bump {
                center: center.as_slice().to_vec(),
                operator: FiniteRankOperator::symmetric_sum(&pairs)?,
            });
        }
        Self {
            dim,
            bumps,
            gaussian: false,
        }
        .scaled_to_bound(target)
    }

    /// `sup_w ‖K(w)‖ ≤ e^{-1} Σ ‖k_i‖`.
    pub fn norm_bound(&self) -> f64 {
        self.bumps.iter().map(|b| b.operator.norm_bound()).sum::<f64>() / E
    }

    pub fn scaled_to_bound(mut self, target: f64) -> Result<Self> {
        let bound = self.norm_bound();
        if bound == 0.0 {
            return Ok(self);
        }
        for b in &mut self.bumps {
            b.operator = b.operator.scaled(target / bound);
        }
        Ok(self)
    }

    /// Rejects maps whose bound is not below ½.
    pub fn validate(&self) -> Result<()> {
        let bound = self.norm_bound();
        if bound >= NORM_GATE {
            return Err(Error::Config(format!(
                "perturbation norm bound {bound:.6} is not below {NORM_GATE}"
            )));
        }
        if self
            .bumps
            .iter()
            .any(|b| b.center.len() != self.dim || b.operator.dim != self.dim)
        {
            return Err(Error::Config("perturbation dimensions are inconsistent".into()));
        }
        Ok(())
    }

    /// Matrix of `K(w)`.
    pub fn at(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        let global = if self.gaussian { (-w.norm_squared()).exp() } else { 1.0 };
        for b in &self.bumps {
            let dist = norm(&w.iter().zip(&b.center).map(|(a, c)| a - c).collect::<Vec<_>>());
            let rho = bump_profile(dist);
            if rho > 0.0 {
                m += b.operator.matrix() * (rho * global);
            }
        }
        m
    }

    /// `(I + K(w)) ξ`.
    pub fn apply_metric(&self, w: &DVector<f64>, xi: &DVector<f64>) -> DVector<f64> {
        xi + self.at(w) * xi
    }

    /// `(I + K(w))^{-1} ξ`.
    pub fn solve_metric(&self, w: &DVector<f64>, xi: &DVector<f64>) -> Result<DVector<f64>> {
        let a = DMatrix::identity(self.dim, self.dim) + self.at(w);
        a.lu()
            .solve(xi)
            .ok_or_else(|| Error::Evaluation("I + K(w) is singular".into()))
    }

    /// `g^K_w(ξ₁, ξ₂) = (ξ₁, (I + K(w))^{-1} ξ₂)`.
    pub fn metric(&self, w: &DVector<f64>, xi1: &DVector<f64>, xi2: &DVector<f64>) -> Result<f64> {
        Ok(xi1.dot(&self.solve_metric(w, xi2)?))
    }
}

/// `∇^K𝒜_H(w) = (I + K(w)) ∇𝒜_H(w)` in coordinates.
pub fn perturbed_gradient_coords(
    ctx: &FunctionalContext,
    pert: &PerturbationMap,
    w: &ExtendedPoint,
) -> Result<DVector<f64>> {
    pert.validate()?;
    if pert.dim != ctx.dim() {
        return Err(Error::Config(format!(
            "perturbation has dimension {}, context {}",
            pert.dim,
            ctx.dim()
        )));
    }
    let g = ctx.gradient_coords(w)?;
    Ok(pert.apply_metric(&ctx.space().coords(w), &g))
}

pub fn perturbed_gradient(ctx: &FunctionalContext, pert: &PerturbationMap, w: &ExtendedPoint) -> Result<ExtendedPoint> {
    Ok(ctx.space().point(&perturbed_gradient_coords(ctx, pert, w)?))
}
