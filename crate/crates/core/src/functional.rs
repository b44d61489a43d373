//! The Rabinowitz-Floer action
//! `𝒜_H(z, λ) = ∫⟨Du, v⟩ - λ ∫(H(x, z) - 1)`, its ℰ-gradient and Hessian form,
//! and the unconstrained action `𝔏_H(z) = ∫⟨Du, v⟩ - ∫H(x, z)`.
//!
//! The quadratic part is evaluated spectrally. `∫H` and `H_z` are evaluated
//! on an oversampled circle grid, with `H_z` projected back onto the retained
//! modes; this makes the gradient the exact derivative of the discretized
//! action. Quadratic Hamiltonians skip the grid, which is what allows them on
//! synthetic spectra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::nonlinearity::{FiberHessian, NonlinearitySpec};
use crate::spectral::{CircleGrid, EsSpace, ExtendedPoint, PairField, Spectrum};

/// Grid points per retained mode.
pub const OVERSAMPLING: usize = 4;

/// Default threshold below which Hessian eigenvalues count as kernel.
pub const KERNEL_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct FunctionalContext {
    space: EsSpace,
    nonlinearity: NonlinearitySpec,
    grid: Option<CircleGrid>,
}

impl FunctionalContext {
    /// Circle spectra get a grid with [`OVERSAMPLING`] points per mode.
    pub fn new(space: EsSpace, nonlinearity: NonlinearitySpec) -> Result<Self> {
        let points = OVERSAMPLING * space.num_modes();
        Self::build(space, nonlinearity, points)
    }

    pub fn with_grid_points(space: EsSpace, nonlinearity: NonlinearitySpec, points: usize) -> Result<Self> {
        Self::build(space, nonlinearity, points)
    }

    fn build(space: EsSpace, nonlinearity: NonlinearitySpec, points: usize) -> Result<Self> {
        nonlinearity.validate()?;
        let grid = if space.spectrum().is_circle() {
            Some(CircleGrid::new(space.spectrum(), points)?)
        } else if nonlinearity.is_quadratic() {
            None
        } else {
            return Err(Error::Domain(
                "non-quadratic Hamiltonians need the circle model; synthetic spectra carry no pointwise geometry"
                    .into(),
            ));
        };
        Ok(Self {
            space,
            nonlinearity,
            grid,
        })
    }

    /// Shorthand for `EsSpace::new` followed by [`new`](Self::new).
    pub fn from_parts(spectrum: Spectrum, s: f64, nonlinearity: NonlinearitySpec) -> Result<Self> {
        Self::new(EsSpace::new(spectrum, s)?, nonlinearity)
    }

    /// Same discretization, different Hamiltonian.
    pub fn with_nonlinearity(&self, nonlinearity: NonlinearitySpec) -> Result<Self> {
        nonlinearity.validate()?;
        if self.grid.is_none() && !nonlinearity.is_quadratic() {
            return Err(Error::Domain("non-quadratic Hamiltonian on a grid-free context".into()));
        }
        Ok(Self {
            space: self.space.clone(),
            nonlinearity,
            grid: self.grid.clone(),
        })
    }

    pub fn space(&self) -> &EsSpace {
        &self.space
    }

    pub fn spectrum(&self) -> &Spectrum {
        self.space.spectrum()
    }

    pub fn nonlinearity(&self) -> &NonlinearitySpec {
        &self.nonlinearity
    }

    pub fn grid(&self) -> Option<&CircleGrid> {
        self.grid.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn check_modes(&self, z: &PairField) -> Result<()> {
        if z.u.len() != self.space.num_modes() || z.v.len() != self.space.num_modes() {
            return Err(Error::Domain(format!(
                "field has {} modes, context expects {}",
                z.u.len(),
                self.space.num_modes()
            )));
        }
        Ok(())
    }

    fn grid_or_err(&self) -> &CircleGrid {
        self.grid.as_ref().expect("non-quadratic contexts always carry a grid")
    }

    /// `∫⟨Du, v⟩ = ½(Lz, z)_{L²}`.
    pub fn kinetic(&self, z: &PairField) -> f64 {
        let lam = self.spectrum().mode_eigenvalues();
        (0..z.u.len()).map(|i| lam[i] * (z.u[i] * z.v[i].conj()).re).sum()
    }

    /// `∫_M H(x, z(x)) dx`.
    pub fn integral_h(&self, z: &PairField) -> Result<f64> {
        self.check_modes(z)?;
        if self.nonlinearity.is_quadratic() {
            return Ok(0.5 * self.nonlinearity.scale * z.l2_norm_sq());
        }
        let grid = self.grid_or_err();
        let g = grid.sample_pair(z);
        let mut acc = 0.0;
        for (m, (u, v)) in g.u.iter().zip(&g.v).enumerate() {
            acc += self.nonlinearity.value(grid.position(m), *u, *v)?;
        }
        Ok(acc / grid.num_points() as f64)
    }

    /// L²-coefficients of `H_z(x, z(x))` projected onto the retained modes.
    pub fn h_gradient_coeffs(&self, z: &PairField) -> Result<PairField> {
        self.check_modes(z)?;
        if self.nonlinearity.is_quadratic() {
            return Ok(z.scaled(self.nonlinearity.scale));
        }
        let grid = self.grid_or_err();
        let g = grid.sample_pair(z);
        let mut hu = Vec::with_capacity(g.num_points());
        let mut hv = Vec::with_capacity(g.num_points());
        for (m, (u, v)) in g.u.iter().zip(&g.v).enumerate() {
            let (a, b) = self.nonlinearity.gradient(grid.position(m), *u, *v)?;
            hu.push(a);
            hv.push(b);
        }
        Ok(PairField {
            u: grid.from_grid(&hu),
            v: grid.from_grid(&hv),
        })
    }

    pub fn action(&self, w: &ExtendedPoint) -> Result<f64> {
        Ok(self.kinetic(&w.z) - w.lambda * (self.integral_h(&w.z)? - 1.0))
    }

    pub fn action_unconstrained(&self, z: &PairField) -> Result<f64> {
        Ok(self.kinetic(z) - self.integral_h(z)?)
    }

    /// `∇𝒜_H(z, λ) = (𝒟ₛ(Lz - λH_z), -∫(H - 1))`.
    pub fn gradient(&self, w: &ExtendedPoint) -> Result<ExtendedPoint> {
        let (r, c) = self.gradient_dual(w)?;
        Ok(ExtendedPoint::new(self.space.ds_apply(&r), c))
    }

    /// The gradient in ℰ-orthonormal coordinates.
    pub fn gradient_coords(&self, w: &ExtendedPoint) -> Result<DVector<f64>> {
        let (r, c) = self.gradient_dual(w)?;
        Ok(self.space.dual_coords(&r, c))
    }

    pub fn gradient_norm(&self, w: &ExtendedPoint) -> Result<f64> {
        Ok(self.gradient_coords(w)?.norm())
    }

    fn gradient_dual(&self, w: &ExtendedPoint) -> Result<(PairField, f64)> {
        let hz = self.h_gradient_coeffs(&w.z)?;
        let r = self.space.l_apply(&w.z).add_scaled(-w.lambda, &hz);
        Ok((r, 1.0 - self.integral_h(&w.z)?))
    }

    /// Bilinear form of `Hess 𝒜_H(w)` in the ℰ-orthonormal coordinate basis.
    pub fn hessian_form(&self, w: &ExtendedPoint) -> Result<HessianForm> {
        self.check_modes(&w.z)?;
        let dim = self.dim();
        let n = dim - 1;
        let hz = self.h_gradient_coeffs(&w.z)?;
        let fiber = self.fiber_hessians(&w.z)?;
        let columns: Vec<DVector<f64>> = (0..n)
            .into_par_iter()
            .map(|j| {
                let e = self.space.basis_vector(j).z;
                let hzz = self.apply_fiber_hessians(fiber.as_deref(), &e);
                let r = self.space.l_apply(&e).add_scaled(-w.lambda, &hzz);
                self.space.dual_coords(&r, -hz.l2_inner(&e))
            })
            .collect();
        let mut m = DMatrix::zeros(dim, dim);
        for (j, col) in columns.iter().enumerate() {
            m.set_column(j, col);
        }
        let coupling = self.space.dual_coords(&hz.scaled(-1.0), 0.0);
        m.set_column(n, &coupling);
        Ok(HessianForm::from_matrix(m))
    }

    fn fiber_hessians(&self, z: &PairField) -> Result<Option<Vec<FiberHessian>>> {
        if self.nonlinearity.is_quadratic() {
            return Ok(None);
        }
        let grid = self.grid_or_err();
        let g = grid.sample_pair(z);
        let mut out = Vec::with_capacity(g.num_points());
        for (m, (u, v)) in g.u.iter().zip(&g.v).enumerate() {
            out.push(self.nonlinearity.hessian(grid.position(m), *u, *v)?);
        }
        Ok(Some(out))
    }

    fn apply_fiber_hessians(&self, fiber: Option<&[FiberHessian]>, xi: &PairField) -> PairField {
        let Some(fiber) = fiber else {
            return xi.scaled(self.nonlinearity.scale);
        };
        let grid = self.grid_or_err();
        let g = grid.sample_pair(xi);
        let (hu, hv): (Vec<_>, Vec<_>) = fiber
            .iter()
            .zip(g.u.iter().zip(&g.v))
            .map(|(h, (du, dv))| h.apply(*du, *dv))
            .unzip();
        PairField {
            u: grid.from_grid(&hu),
            v: grid.from_grid(&hv),
        }
    }

    /// `𝒟ₛL ⊕ Id_ℝ` in the same coordinates as [`hessian_form`](Self::hessian_form).
    pub fn reference_operator(&self) -> HessianForm {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for j in 0..dim - 1 {
            let e = self.space.basis_vector(j).z;
            m.set_column(j, &self.space.dual_coords(&self.space.l_apply(&e), 0.0));
        }
        m[(dim - 1, dim - 1)] = 1.0;
        HessianForm::from_matrix(m)
    }

    /// Central differences of `𝒜` along `xi` and of `∇𝒜` along `eta`,
    /// compared with `(∇𝒜, xi)` and `Hess(xi, eta)`.
    pub fn derivative_check(
        &self,
        w: &ExtendedPoint,
        xi: &DVector<f64>,
        eta: &DVector<f64>,
        step: f64,
    ) -> Result<DerivativeCheck> {
        let sp = &self.space;
        let x = sp.coords(w);
        let exact_g = self.gradient_coords(w)?.dot(xi);
        let fp = self.action(&sp.point(&(&x + xi * step)))?;
        let fm = self.action(&sp.point(&(&x - xi * step)))?;
        let fd_g = (fp - fm) / (2.0 * step);
        let exact_h = self.hessian_form(w)?.bilinear(xi, eta);
        let gp = self.gradient_coords(&sp.point(&(&x + eta * step)))?;
        let gm = self.gradient_coords(&sp.point(&(&x - eta * step)))?;
        let fd_h = ((gp - gm) / (2.0 * step)).dot(xi);
        let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        Ok(DerivativeCheck {
            gradient: exact_g,
            gradient_fd: fd_g,
            gradient_rel_error: rel(fd_g, exact_g),
            hessian: exact_h,
            hessian_fd: fd_h,
            hessian_rel_error: rel(fd_h, exact_h),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DerivativeCheck {
    pub gradient: f64,
    pub gradient_fd: f64,
    pub gradient_rel_error: f64,
    pub hessian: f64,
    pub hessian_fd: f64,
    pub hessian_rel_error: f64,
}

/// Counts of negative, zero and positive eigenvalues.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

/// A real symmetric bilinear form in an orthonormal basis.
#[derive(Clone, Debug)]
pub struct HessianForm {
    matrix: DMatrix<f64>,
    symmetry_defect: f64,
}

impl HessianForm {
    /// Symmetrizes `m`, recording the largest asymmetry.
    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let defect = (&m - m.transpose()).abs().max();
        let matrix = (&m + m.transpose()) * 0.5;
        Self {
            matrix,
            symmetry_defect: defect,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn symmetry_defect(&self) -> f64 {
        self.symmetry_defect
    }

    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * y))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        e.sort_by(f64::total_cmp);
        e
    }

    /// Eigen-decomposition with eigenvalues sorted ascending.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut order: Vec<usize> = (0..self.dim()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = DMatrix::from_columns(
            &order
                .iter()
                .map(|&i| eig.eigenvectors.column(i).into_owned())
                .collect::<Vec<_>>(),
        );
        (values, vectors)
    }

    pub fn inertia(&self, kernel_tol: f64) -> Inertia {
        inertia_of(&self.eigenvalues(), kernel_tol)
    }

    /// Smallest `|μ|` among eigenvalues outside the kernel band.
    pub fn spectral_gap(&self, kernel_tol: f64) -> f64 {
        self.eigenvalues()
            .iter()
            .map(|e| e.abs())
            .filter(|a| *a >= kernel_tol)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn inertia_of(eigenvalues: &[f64], kernel_tol: f64) -> Inertia {
    let mut out = Inertia {
        negative: 0,
        zero: 0,
        positive: 0,
    };
    for &e in eigenvalues {
        if e.abs() < kernel_tol {
            out.zero += 1;
        } else if e < 0.0 {
            out.negative += 1;
        } else {
            out.positive += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinearity::Coefficient;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn h0_ctx(modes: usize, s: f64) -> FunctionalContext {
        FunctionalContext::from_parts(Spectrum::circle(modes).unwrap(), s, NonlinearitySpec::quadratic()).unwrap()
    }

    fn power_ctx(modes: usize, s: f64) -> FunctionalContext {
        let h = NonlinearitySpec::power(
            Coefficient::Sampled(vec![1.0, 1.5, 0.7]),
            Coefficient::Constant(1.2),
            3.0,
            2.5,
        )
        .unwrap();
        FunctionalContext::from_parts(Spectrum::circle(modes).unwrap(), s, h).unwrap()
    }

    /// Pointwise quadrature of `⟨Du, v⟩ - λ(H - 1)` on a fine grid, built
    /// from direct exponential sums rather than the FFT.
    fn quadrature_action(ctx: &FunctionalContext, w: &ExtendedPoint, points: usize) -> f64 {
        let lam = ctx.spectrum().mode_eigenvalues();
        let mut acc = 0.0;
        for m in 0..points {
            let t = m as f64 / points as f64;
            let (mut u, mut du, mut v) = (
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
                Complex64::new(0.0, 0.0),
            );
            for (i, &l) in lam.iter().enumerate() {
                let e = Complex64::from_polar(1.0, l * t);
                u += w.z.u[i] * e;
                du += w.z.u[i] * e * l;
                v += w.z.v[i] * e;
            }
            let h = ctx.nonlinearity().value(t, u, v).unwrap();
            acc += (du * v.conj()).re - w.lambda * (h - 1.0);
        }
        acc / points as f64
    }

    fn critical_h0(ctx: &FunctionalContext, mode: usize, sign: f64) -> ExtendedPoint {
        let mut z = PairField::zeros(ctx.space().num_modes());
        z.u[mode] = Complex64::new(1.0, 0.0);
        z.v[mode] = Complex64::new(sign, 0.0);
        let lam = ctx.spectrum().mode_eigenvalues()[mode] * sign;
        ExtendedPoint::new(z, lam)
    }

    #[test]
    fn action_examples() {
        let ctx = h0_ctx(3, 0.5);
        assert_eq!(ctx.action(&ExtendedPoint::new(PairField::zeros(6), 5.0)).unwrap(), 5.0);
        for (mode, sign) in [(3, 1.0), (4, 1.0), (3, -1.0), (1, 1.0)] {
            let w = critical_h0(&ctx, mode, sign);
            assert!((ctx.action(&w).unwrap() - w.lambda).abs() < 1e-14);
        }
        assert_eq!(ctx.action_unconstrained(&PairField::zeros(6)).unwrap(), 0.0);
    }

    #[test]
    fn action_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for ctx in [h0_ctx(4, 0.4), power_ctx(4, 0.6)] {
            for _ in 0..5 {
                let w = ExtendedPoint::new(PairField::random(8, 0.5, &mut rng), rng.gen_range(-3.0..3.0));
                let spectral = ctx.action(&w).unwrap();
                let quad = quadrature_action(&ctx, &w, 32);
                assert!(
                    (spectral - quad).abs() < 1e-10 * quad.abs().max(1.0),
                    "{spectral} vs {quad}"
                );
                let l = ctx.action_unconstrained(&w.z).unwrap();
                let a1 = ctx.action(&ExtendedPoint::new(w.z.clone(), 1.0)).unwrap();
                assert!((a1 - l - 1.0).abs() < 1e-12 * a1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn power_single_mode_integral() {
        let h = NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0).unwrap();
        let ctx = FunctionalContext::from_parts(Spectrum::circle(2).unwrap(), 0.5, h).unwrap();
        let c = Complex64::new(0.6, -0.8) * 1.3;
        let mut z = PairField::zeros(4);
        z.u[2] = c;
        z.v[2] = c;
        let expected = 2.0 * c.norm().powi(4) / 4.0;
        assert!((ctx.integral_h(&z).unwrap() - expected).abs() < 1e-13);
        let q = h0_ctx(2, 0.5);
        let mut z = PairField::zeros(4);
        z.u[1] = Complex64::new(2f64.sqrt(), 0.0);
        assert!((q.integral_h(&z).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let ctx = h0_ctx(3, 0.3);
        let g = ctx.gradient(&ExtendedPoint::new(PairField::zeros(6), 2.5)).unwrap();
        assert_eq!(g.lambda, 1.0);
        assert_eq!(g.z.l2_norm_sq(), 0.0);
        for (mode, sign) in [(3, 1.0), (5, -1.0), (0, 1.0)] {
            let w = critical_h0(&ctx, mode, sign);
            assert!(ctx.gradient_norm(&w).unwrap() < 1e-12);
            assert!((ctx.space().e_norm(&ctx.gradient(&w).unwrap())) < 1e-12);
        }
    }

    #[test]
    fn gradient_coords_agree_with_field_gradient() {
        let ctx = power_ctx(3, 0.35);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let w = ExtendedPoint::new(PairField::random(6, 0.7, &mut rng), 0.9);
        let a = ctx.space().coords(&ctx.gradient(&w).unwrap());
        let b = ctx.gradient_coords(&w).unwrap();
        assert!((a - b).norm() < 1e-12);
    }

    fn fd_gradient(ctx: &FunctionalContext, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sp = ctx.space();
        let h = 1e-5;
        for _ in 0..10 {
            let w = ExtendedPoint::new(
                PairField::random(sp.num_modes(), 0.4, &mut rng),
                rng.gen_range(-2.0..2.0),
            );
            let x = sp.coords(&w);
            let g = ctx.gradient_coords(&w).unwrap();
            let xi = DVector::from_fn(sp.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let fp = ctx.action(&sp.point(&(&x + &xi * h))).unwrap();
            let fm = ctx.action(&sp.point(&(&x - &xi * h))).unwrap();
            let fd = (fp - fm) / (2.0 * h);
            let exact = g.dot(&xi);
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1.0), "{fd} vs {exact}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        fd_gradient(&h0_ctx(4, 0.5), 13);
        fd_gradient(&power_ctx(4, 0.3), 14);
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        for ctx in [h0_ctx(3, 0.45), power_ctx(3, 0.55)] {
            let mut rng = ChaCha8Rng::seed_from_u64(15);
            let sp = ctx.space();
            let h = 1e-5;
            for _ in 0..5 {
                let w = ExtendedPoint::new(
                    PairField::random(sp.num_modes(), 0.5, &mut rng),
                    rng.gen_range(-2.0..2.0),
                );
                let form = ctx.hessian_form(&w).unwrap();
                assert!(form.symmetry_defect() < 1e-10);
                let x = sp.coords(&w);
                let eta = DVector::from_fn(sp.dim(), |_, _| rng.gen_range(-1.0..1.0));
                let xi = DVector::from_fn(sp.dim(), |_, _| rng.gen_range(-1.0..1.0));
                let gp = ctx.gradient_coords(&sp.point(&(&x + &eta * h))).unwrap();
                let gm = ctx.gradient_coords(&sp.point(&(&x - &eta * h))).unwrap();
                let fd = ((gp - gm) / (2.0 * h)).dot(&xi);
                let exact = form.bilinear(&xi, &eta);
                assert!((fd - exact).abs() <= 1e-5 * exact.abs().max(1.0), "{fd} vs {exact}");
            }
        }
    }

    #[test]
    fn hessian_at_origin() {
        let ctx = h0_ctx(2, 0.5);
        let form = ctx.hessian_form(&ExtendedPoint::new(PairField::zeros(4), 0.0)).unwrap();
        let n = ctx.dim() - 1;
        assert_eq!(form.matrix()[(n, n)], 0.0);
        for j in 0..n {
            assert_eq!(form.matrix()[(j, n)], 0.0);
        }
        let reference = ctx.reference_operator();
        let diff = form.matrix().view((0, 0), (n, n)) - reference.matrix().view((0, 0), (n, n));
        assert!(diff.abs().max() < 1e-14);
    }

    #[test]
    fn reference_operator_counts() {
        let ctx = h0_ctx(2, 0.3);
        let r = ctx.reference_operator();
        for e in r.eigenvalues() {
            assert!((e.abs() - 1.0).abs() < 1e-12);
        }
        // k = -1, -2 each with m = 2 → 4 complex → 8 real negative directions
        assert_eq!(r.inertia(KERNEL_TOL).negative, 8);
        assert_eq!(r.matrix()[(ctx.dim() - 1, ctx.dim() - 1)], 1.0);
        let syn = FunctionalContext::from_parts(
            Spectrum::synthetic(vec![(1.0, 1), (2.0, 1), (3.0, 1)]).unwrap(),
            0.5,
            NonlinearitySpec::quadratic(),
        )
        .unwrap();
        assert_eq!(syn.reference_operator().inertia(KERNEL_TOL).negative, 6);
    }

    #[test]
    fn circle_equivariance_of_action() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for ctx in [h0_ctx(3, 0.5), power_ctx(3, 0.5)] {
            for _ in 0..5 {
                let w = ExtendedPoint::new(PairField::random(6, 0.6, &mut rng), 1.3);
                let theta = rng.gen_range(0.0..2.0 * PI);
                let r = ExtendedPoint::new(w.z.rotated(theta), w.lambda);
                let (a, b) = (ctx.action(&w).unwrap(), ctx.action(&r).unwrap());
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn high_frequency_eigenvalues_approach_unit_modulus() {
        let ctx = power_ctx(8, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let w = ExtendedPoint::new(PairField::random(16, 0.05, &mut rng), 0.5);
        let form = ctx.hessian_form(&w).unwrap();
        // restrict to the highest-frequency quarter of the window
        let lam = ctx.spectrum().mode_eigenvalues();
        let cutoff = {
            let mut a: Vec<f64> = lam.iter().map(|l| l.abs()).collect();
            a.sort_by(f64::total_cmp);
            a[3 * a.len() / 4]
        };
        let idx: Vec<usize> = (0..ctx.dim() - 1)
            .filter(|&j| lam[(j % (2 * lam.len())) / 2].abs() >= cutoff)
            .collect();
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |a, b| form.matrix()[(idx[a], idx[b])]);
        for e in SymmetricEigen::new(sub).eigenvalues.iter() {
            assert!((e.abs() - 1.0).abs() < 0.05, "eigenvalue {e}");
        }
    }

    #[test]
    fn synthetic_power_is_rejected() {
        let h = NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0).unwrap();
        assert!(FunctionalContext::from_parts(Spectrum::synthetic(vec![(1.0, 1)]).unwrap(), 0.5, h).is_err());
    }
}
