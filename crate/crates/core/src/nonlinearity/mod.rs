//! Hamiltonians `H(x, u, v)` on the fibers of `ΣM ⊕ ΣM`, the exponent
//! feasibility solver and sampled hypothesis checkers.
//!
//! Fibers are rank one here (`ℂ` for each of `u` and `v`). Derivatives are
//! taken with respect to the real inner product `Re⟨·,·⟩`, so the fiber
//! gradient is a pair of complex numbers and the fiber Hessian a real 4×4
//! matrix in the coordinates `(Re u, Im u, Re v, Im v)`.

mod exponents;
mod hypotheses;

pub use exponents::{select_s, ExponentWitness};
pub use hypotheses::{
    check_h4, check_hypotheses, FiberWitness, H4Settings, HypothesisCheck, HypothesisOutcome, HypothesisReport,
};

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fiber Hessian in the real coordinates `(Re u, Im u, Re v, Im v)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FiberHessian(pub [[f64; 4]; 4]);

impl FiberHessian {
    pub fn zero() -> Self {
        Self([[0.0; 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = [[0.0; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        Self(m)
    }

    pub fn apply(&self, du: Complex64, dv: Complex64) -> (Complex64, Complex64) {
        let x = [du.re, du.im, dv.re, dv.im];
        let mut y = [0.0; 4];
        for (yi, row) in y.iter_mut().zip(&self.0) {
            *yi = row.iter().zip(&x).map(|(a, b)| a * b).sum();
        }
        (Complex64::new(y[0], y[1]), Complex64::new(y[2], y[3]))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut m = self.0;
        m.iter_mut().flatten().for_each(|a| *a *= factor);
        Self(m)
    }

    /// Operator norm of the 2×2 block at rows `r`, columns `c` (0 = u, 1 = v).
    pub fn block_norm(&self, r: usize, c: usize) -> f64 {
        let a = self.0[2 * r][2 * c];
        let b = self.0[2 * r][2 * c + 1];
        let d = self.0[2 * r + 1][2 * c];
        let e = self.0[2 * r + 1][2 * c + 1];
        // largest singular value of [[a, b], [d, e]]
        let s1 = a * a + b * b + d * d + e * e;
        let det = a * e - b * d;
        let disc = (s1 * s1 - 4.0 * det * det).max(0.0).sqrt();
        ((s1 + disc) / 2.0).sqrt()
    }

    fn set_block(&mut self, r: usize, c: usize, block: [[f64; 2]; 2]) {
        for (i, row) in block.iter().enumerate() {
            for (j, val) in row.iter().enumerate() {
                self.0[2 * r + i][2 * c + j] = *val;
            }
        }
    }
}

/// Fiberwise evaluation of a Hamiltonian at a base point `x ∈ [0, 1)`.
///
/// Implementations must be re-entrant; evaluations may run in parallel.
pub trait Hamiltonian: Send + Sync {
    fn value(&self, x: f64, u: Complex64, v: Complex64) -> Result<f64>;
    /// `(H_u, H_v)`.
    fn gradient(&self, x: f64, u: Complex64, v: Complex64) -> Result<(Complex64, Complex64)>;
    fn hessian(&self, x: f64, u: Complex64, v: Complex64) -> Result<FiberHessian>;
}

type ValueFn = dyn Fn(f64, Complex64, Complex64) -> Result<f64> + Send + Sync;
type GradientFn = dyn Fn(f64, Complex64, Complex64) -> Result<(Complex64, Complex64)> + Send + Sync;
type HessianFn = dyn Fn(f64, Complex64, Complex64) -> Result<FiberHessian> + Send + Sync;

/// Hamiltonian assembled from user callbacks.
pub struct FnHamiltonian {
    value: Box<ValueFn>,
    gradient: Box<GradientFn>,
    hessian: Box<HessianFn>,
}

impl FnHamiltonian {
    pub fn new(
        value: impl Fn(f64, Complex64, Complex64) -> Result<f64> + Send + Sync + 'static,
        gradient: impl Fn(f64, Complex64, Complex64) -> Result<(Complex64, Complex64)> + Send + Sync + 'static,
        hessian: impl Fn(f64, Complex64, Complex64) -> Result<FiberHessian> + Send + Sync + 'static,
    ) -> Self {
        Self {
            value: Box::new(value),
            gradient: Box::new(gradient),
            hessian: Box::new(hessian),
        }
    }
}

impl Hamiltonian for FnHamiltonian {
    fn value(&self, x: f64, u: Complex64, v: Complex64) -> Result<f64> {
        (self.value)(x, u, v)
    }
    fn gradient(&self, x: f64, u: Complex64, v: Complex64) -> Result<(Complex64, Complex64)> {
        (self.gradient)(x, u, v)
    }
    fn hessian(&self, x: f64, u: Complex64, v: Complex64) -> Result<FiberHessian> {
        (self.hessian)(x, u, v)
    }
}

/// Positive coefficient function on the circle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    /// Uniform samples at `t_m = m / len`, periodically linearly interpolated.
    Sampled(Vec<f64>),
}

impl Coefficient {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Sampled(s) => {
                let n = s.len();
                let pos = x.rem_euclid(1.0) * n as f64;
                let i = (pos.floor() as usize).min(n - 1);
                let frac = pos - i as f64;
                s[i] * (1.0 - frac) + s[(i + 1) % n] * frac
            }
        }
    }

    pub fn min(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Sampled(s) => s.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Sampled(s) => s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if let Coefficient::Sampled(s) = self {
            if s.is_empty() {
                return Err(Error::Config(format!("{name}: empty sample list")));
            }
        }
        let lo = self.min();
        if !(lo > 0.0) || !self.max().is_finite() {
            return Err(Error::Config(format!(
                "{name} must be strictly positive and finite (min {lo})"
            )));
        }
        Ok(())
    }
}

/// Which Hamiltonian.
#[derive(Clone)]
pub enum NonlinearityKind {
    /// `H₀ = ½(|u|² + |v|²)`.
    Quadratic,
    /// `f(x)|u|^{p+1}/(p+1) + g(x)|v|^{q+1}/(q+1)`.
    Power {
        f: Coefficient,
        g: Coefficient,
        p: f64,
        q: f64,
    },
    /// User callbacks with the growth exponents used by the checkers.
    Custom {
        hamiltonian: Arc<dyn Hamiltonian>,
        p: f64,
        q: f64,
    },
}

impl fmt::Debug for NonlinearityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Quadratic => write!(f, "Quadratic"),
            Self::Power { f: ff, g, p, q } => f
                .debug_struct("Power")
                .field("f", ff)
                .field("g", g)
                .field("p", p)
                .field("q", q)
                .finish(),
            Self::Custom { p, q, .. } => f
                .debug_struct("Custom")
                .field("p", p)
                .field("q", q)
                .finish_non_exhaustive(),
        }
    }
}

/// Constants attached to hypotheses (H1)-(H3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub delta: f64,
}

impl Default for HypothesisConstants {
    fn default() -> Self {
        Self {
            c0: 1.0,
            c1: 1.0,
            c2: 3.0,
            delta: 1e-3,
        }
    }
}

/// A Hamiltonian together with an overall amplitude and hypothesis metadata.
#[derive(Clone, Debug)]
pub struct NonlinearitySpec {
    pub kind: NonlinearityKind,
    /// Multiplies `H` and all its derivatives.
    pub scale: f64,
    pub constants: HypothesisConstants,
}

impl NonlinearitySpec {
    pub fn quadratic() -> Self {
        Self {
            kind: NonlinearityKind::Quadratic,
            scale: 1.0,
            constants: HypothesisConstants::default(),
        }
    }

    pub fn power(f: Coefficient, g: Coefficient, p: f64, q: f64) -> Result<Self> {
        let spec = Self {
            kind: NonlinearityKind::Power { f, g, p, q },
            scale: 1.0,
            constants: HypothesisConstants {
                c0: 1.0,
                c1: 1.0,
                c2: p.max(q),
                delta: 1e-3,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn custom(hamiltonian: Arc<dyn Hamiltonian>, p: f64, q: f64) -> Self {
        Self {
            kind: NonlinearityKind::Custom { hamiltonian, p, q },
            scale: 1.0,
            constants: HypothesisConstants::default(),
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_constants(mut self, constants: HypothesisConstants) -> Self {
        self.constants = constants;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0) || !self.scale.is_finite() {
            return Err(Error::Config(format!("scale {} must be positive", self.scale)));
        }
        let c = &self.constants;
        if !(c.c0 > 0.0 && c.c0 < 2.0) {
            return Err(Error::Config(format!("c0 = {} not in (0, 2)", c.c0)));
        }
        if !(c.c1 > 0.0 && c.c2 > 0.0 && c.delta > 0.0) {
            return Err(Error::Config("c1, c2 and delta must be positive".into()));
        }
        if let NonlinearityKind::Power { f, g, p, q } = &self.kind {
            if !(*p > 1.0 && *q > 1.0) {
                return Err(Error::Config(format!("exponents p = {p}, q = {q} must exceed 1")));
            }
            f.validate("f")?;
            g.validate("g")?;
        }
        Ok(())
    }

    /// Growth exponents `(p, q)`; the quadratic Hamiltonian grows like `p = q = 1`.
    pub fn exponents(&self) -> (f64, f64) {
        match &self.kind {
            NonlinearityKind::Quadratic => (1.0, 1.0),
            NonlinearityKind::Power { p, q, .. } | NonlinearityKind::Custom { p, q, .. } => (*p, *q),
        }
    }

    /// Whether `H(x, e^{iθ}u, e^{iθ}v) = H(x, u, v)` holds by construction.
    pub fn is_circle_equivariant(&self) -> bool {
        !matches!(self.kind, NonlinearityKind::Custom { .. })
    }

    /// Whether `H_z` and `H_zz` are exactly `scale · (u, v)` and `scale · I`,
    /// which lets callers bypass quadrature.
    pub fn is_quadratic(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Quadratic)
    }

    /// Constant `C` with `|H| ≤ C(1 + |u|^{p+1} + |v|^{q+1})`, when known in
    /// closed form.
    pub fn growth_constant(&self) -> Option<f64> {
        match &self.kind {
            NonlinearityKind::Quadratic => Some(0.5 * self.scale),
            NonlinearityKind::Power { f, g, p, q } => Some(self.scale * (f.max() / (p + 1.0)).max(g.max() / (q + 1.0))),
            NonlinearityKind::Custom { .. } => None,
        }
    }

    pub fn value(&self, x: f64, u: Complex64, v: Complex64) -> Result<f64> {
        let h = match &self.kind {
            NonlinearityKind::Quadratic => 0.5 * (u.norm_sqr() + v.norm_sqr()),
            NonlinearityKind::Power { f, g, p, q } => {
                f.at(x) * u.norm().powf(p + 1.0) / (p + 1.0) + g.at(x) * v.norm().powf(q + 1.0) / (q + 1.0)
            }
            NonlinearityKind::Custom { hamiltonian, .. } => hamiltonian.value(x, u, v)?,
        };
        Ok(self.scale * h)
    }

    pub fn gradient(&self, x: f64, u: Complex64, v: Complex64) -> Result<(Complex64, Complex64)> {
        let (hu, hv) = match &self.kind {
            NonlinearityKind::Quadratic => (u, v),
            NonlinearityKind::Power { f, g, p, q } => (
                u * (f.at(x) * u.norm().powf(p - 1.0)),
                v * (g.at(x) * v.norm().powf(q - 1.0)),
            ),
            NonlinearityKind::Custom { hamiltonian, .. } => hamiltonian.gradient(x, u, v)?,
        };
        Ok((hu * self.scale, hv * self.scale))
    }

    pub fn hessian(&self, x: f64, u: Complex64, v: Complex64) -> Result<FiberHessian> {
        let h = match &self.kind {
            NonlinearityKind::Quadratic => FiberHessian::identity(),
            NonlinearityKind::Power { f, g, p, q } => {
                let mut h = FiberHessian::zero();
                h.set_block(0, 0, power_block(f.at(x), *p, u));
                h.set_block(1, 1, power_block(g.at(x), *q, v));
                h
            }
            NonlinearityKind::Custom { hamiltonian, .. } => hamiltonian.hessian(x, u, v)?,
        };
        Ok(h.scaled(self.scale))
    }
}

/// Hessian of `c|u|^{p+1}/(p+1)` on `ℂ ≅ ℝ²`:
/// `c(|u|^{p-1} I + (p-1)|u|^{p-3} u uᵀ)`, with the limit `0` at `u = 0`.
fn power_block(c: f64, p: f64, u: Complex64) -> [[f64; 2]; 2] {
    let r = u.norm();
    if r == 0.0 {
        return [[0.0; 2]; 2];
    }
    let iso = c * r.powf(p - 1.0);
    let rank1 = c * (p - 1.0) * r.powf(p - 3.0);
    [
        [iso + rank1 * u.re * u.re, rank1 * u.re * u.im],
        [rank1 * u.im * u.re, iso + rank1 * u.im * u.im],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn power33() -> NonlinearitySpec {
        NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0).unwrap()
    }

    #[test]
    fn quadratic_at_origin() {
        let h = NonlinearitySpec::quadratic();
        assert_eq!(h.value(0.3, c(0.0, 0.0), c(0.0, 0.0)).unwrap(), 0.0);
        assert_eq!(
            h.gradient(0.3, c(0.0, 0.0), c(0.0, 0.0)).unwrap(),
            (c(0.0, 0.0), c(0.0, 0.0))
        );
        assert_eq!(
            h.hessian(0.1, c(1.0, 2.0), c(3.0, 4.0)).unwrap(),
            FiberHessian::identity()
        );
    }

    #[test]
    fn power_substitution() {
        let h = power33();
        let x = 0.7;
        let val = h.value(0.0, c(x, 0.0), c(x, 0.0)).unwrap();
        assert!((val - x.powi(4) / 2.0).abs() < 1e-15);
        let (hu, hv) = h.gradient(0.0, c(x, 0.0), c(x, 0.0)).unwrap();
        assert!((hu - c(x.powi(3), 0.0)).norm() < 1e-15);
        assert!((hv - c(x.powi(3), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 1.0, 3.0).is_err());
        assert!(NonlinearitySpec::power(Coefficient::Constant(0.0), Coefficient::Constant(1.0), 2.0, 3.0).is_err());
        assert!(NonlinearitySpec::power(
            Coefficient::Sampled(vec![1.0, -0.5]),
            Coefficient::Constant(1.0),
            2.0,
            3.0
        )
        .is_err());
        let bad = NonlinearitySpec::quadratic().with_constants(HypothesisConstants {
            c0: 2.5,
            ..Default::default()
        });
        assert!(bad.validate().is_err());
    }

    #[test]
    fn sampled_coefficient_interpolates_periodically() {
        let f = Coefficient::Sampled(vec![1.0, 3.0]);
        assert_eq!(f.at(0.0), 1.0);
        assert_eq!(f.at(0.25), 2.0);
        assert_eq!(f.at(0.75), 2.0);
        assert_eq!(f.at(1.5), 3.0);
    }

    fn fd_checks(h: &NonlinearitySpec, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let step = 1e-6;
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            let z = [
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            ];
            let at = |z: [f64; 4]| (c(z[0], z[1]), c(z[2], z[3]));
            let (u, v) = at(z);
            let (hu, hv) = h.gradient(x, u, v).unwrap();
            let grad = [hu.re, hu.im, hv.re, hv.im];
            let hess = h.hessian(x, u, v).unwrap();
            for k in 0..4 {
                let mut zp = z;
                let mut zm = z;
                zp[k] += step;
                zm[k] -= step;
                let (up, vp) = at(zp);
                let (um, vm) = at(zm);
                let fd = (h.value(x, up, vp).unwrap() - h.value(x, um, vm).unwrap()) / (2.0 * step);
                assert!(
                    (fd - grad[k]).abs() <= 1e-6 * grad[k].abs().max(1.0),
                    "gradient mismatch {fd} vs {}",
                    grad[k]
                );
                let (gpu, gpv) = h.gradient(x, up, vp).unwrap();
                let (gmu, gmv) = h.gradient(x, um, vm).unwrap();
                let col = [
                    (gpu.re - gmu.re) / (2.0 * step),
                    (gpu.im - gmu.im) / (2.0 * step),
                    (gpv.re - gmv.re) / (2.0 * step),
                    (gpv.im - gmv.im) / (2.0 * step),
                ];
                for (r, c) in col.iter().enumerate() {
                    assert!(
                        (c - hess.0[r][k]).abs() <= 1e-6 * hess.0[r][k].abs().max(1.0),
                        "hessian mismatch at ({r},{k})"
                    );
                }
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        fd_checks(&NonlinearitySpec::quadratic().with_scale(1.7), 1);
        fd_checks(&power33(), 2);
        fd_checks(
            &NonlinearitySpec::power(
                Coefficient::Sampled(vec![1.0, 2.0, 0.5]),
                Coefficient::Constant(0.8),
                2.5,
                1.5,
            )
            .unwrap(),
            3,
        );
    }

    #[test]
    fn growth_bound_holds() {
        let h = NonlinearitySpec::power(
            Coefficient::Sampled(vec![1.0, 2.0, 0.5]),
            Coefficient::Constant(0.8),
            2.5,
            1.5,
        )
        .unwrap();
        let cst = h.growth_constant().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let x: f64 = rng.gen();
            let u = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let v = c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let bound = cst * (1.0 + u.norm().powf(3.5) + v.norm().powf(2.5));
            assert!(h.value(x, u, v).unwrap().abs() <= bound);
        }
    }

    #[test]
    fn circle_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for h in [NonlinearitySpec::quadratic(), power33()] {
            for _ in 0..100 {
                let theta: f64 = rng.gen_range(0.0..6.3);
                let ph = Complex64::from_polar(1.0, theta);
                let u = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let v = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let a = h.value(0.2, u, v).unwrap();
                let b = h.value(0.2, u * ph, v * ph).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn block_norm_is_largest_singular_value() {
        let mut h = FiberHessian::zero();
        h.set_block(0, 0, [[3.0, 0.0], [0.0, -4.0]]);
        assert!((h.block_norm(0, 0) - 4.0).abs() < 1e-14);
        h.set_block(0, 1, [[1.0, 1.0], [1.0, 1.0]]);
        assert!((h.block_norm(0, 1) - 2.0).abs() < 1e-14);
    }
}
