//! Spectral model of the Dirac operator and the fractional spaces built on it.
//!
//! Spinor fields are stored by their coefficients in an L²-orthonormal
//! eigenbasis of `D`. All operators here (`|D|^r`, `𝒟ₛ`, `L`, `P±`) are
//! diagonal or 2×2-block in that basis, so they act mode by mode.

mod grid;
mod spectrum;

pub use grid::{CircleGrid, GridSampling};
pub use spectrum::{LSpectrum, Spectrum, SpectrumFile, SpectrumModel};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spectral coefficients of a pair `z = (u, v)` of spinor fields.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairField {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl PairField {
    pub fn zeros(num_modes: usize) -> Self {
        Self {
            u: vec![Complex64::new(0.0, 0.0); num_modes],
            v: vec![Complex64::new(0.0, 0.0); num_modes],
        }
    }

    /// Coefficients drawn uniformly from the square `[-scale, scale]²`.
    pub fn random<R: Rng + ?Sized>(num_modes: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = || Complex64::new(rng.gen_range(-scale..=scale), rng.gen_range(-scale..=scale));
        let u = (0..num_modes).map(|_| draw()).collect();
        let v = (0..num_modes).map(|_| draw()).collect();
        Self { u, v }
    }

    pub fn num_modes(&self) -> usize {
        self.u.len()
    }

    /// Real part of the L² Hermitian product.
    pub fn l2_inner(&self, other: &PairField) -> f64 {
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .map(|(a, b)| (a * b.conj()).re)
            .sum()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.l2_inner(self)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            u: self.u.iter().map(|c| c * factor).collect(),
            v: self.v.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self + factor · other`.
    pub fn add_scaled(&self, factor: f64, other: &PairField) -> Self {
        Self {
            u: self.u.iter().zip(&other.u).map(|(a, b)| a + b * factor).collect(),
            v: self.v.iter().zip(&other.v).map(|(a, b)| a + b * factor).collect(),
        }
    }

    /// Diagonal `S¹`-action `z ↦ e^{iθ} z`.
    pub fn rotated(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        Self {
            u: self.u.iter().map(|c| c * phase).collect(),
            v: self.v.iter().map(|c| c * phase).collect(),
        }
    }
}

/// A point `w = (z, λ)` of the extended space `ℰ = E_s × ℝ` (also used for
/// tangent vectors).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedPoint {
    pub z: PairField,
    pub lambda: f64,
}

impl ExtendedPoint {
    pub fn new(z: PairField, lambda: f64) -> Self {
        Self { z, lambda }
    }

    pub fn zeros(num_modes: usize) -> Self {
        Self::new(PairField::zeros(num_modes), 0.0)
    }
}

/// `a_k ↦ |λ_k|^r a_k`.
pub fn fractional_power_apply(spectrum: &Spectrum, coeffs: &[Complex64], r: f64) -> Vec<Complex64> {
    spectrum
        .mode_eigenvalues()
        .iter()
        .zip(coeffs)
        .map(|(lam, a)| a * lam.abs().powf(r))
        .collect()
}

/// The Hilbert space `E_s = H^s × H^{1-s}` over a truncated spectrum, with
/// the extension `ℰ = E_s × ℝ`.
///
/// Besides the intrinsic inner products this fixes an ℰ-orthonormal real
/// coordinate system: for each mode `i`, the u-block contributes
/// `|λ_i|^s (Re a_i, Im a_i)`, the v-block `|λ_i|^{1-s} (Re b_i, Im b_i)`, and
/// the last coordinate is `λ`. Euclidean geometry in these coordinates is the
/// ℰ geometry.
#[derive(Clone, Debug)]
pub struct EsSpace {
    spectrum: Spectrum,
    s: f64,
    u_weight: Vec<f64>,
    v_weight: Vec<f64>,
}

impl EsSpace {
    pub fn new(spectrum: Spectrum, s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::Domain(format!("fractional exponent s = {s} not in (0, 1)")));
        }
        let u_weight = spectrum.mode_eigenvalues().iter().map(|l| l.abs().powf(s)).collect();
        let v_weight = spectrum
            .mode_eigenvalues()
            .iter()
            .map(|l| l.abs().powf(1.0 - s))
            .collect();
        Ok(Self {
            spectrum,
            s,
            u_weight,
            v_weight,
        })
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn num_modes(&self) -> usize {
        self.spectrum.num_modes()
    }

    /// Real dimension of the truncated `ℰ`.
    pub fn dim(&self) -> usize {
        4 * self.num_modes() + 1
    }

    pub fn es_inner(&self, a: &PairField, b: &PairField) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.num_modes() {
            acc += self.u_weight[i].powi(2) * (a.u[i] * b.u[i].conj()).re;
            acc += self.v_weight[i].powi(2) * (a.v[i] * b.v[i].conj()).re;
        }
        acc
    }

    pub fn es_norm(&self, z: &PairField) -> f64 {
        self.es_inner(z, z).sqrt()
    }

    pub fn e_inner(&self, a: &ExtendedPoint, b: &ExtendedPoint) -> f64 {
        self.es_inner(&a.z, &b.z) + a.lambda * b.lambda
    }

    pub fn e_norm(&self, w: &ExtendedPoint) -> f64 {
        self.e_inner(w, w).sqrt()
    }

    /// `𝒟ₛ = diag(|D|^{-2s}, |D|^{-2(1-s)})`, mapping L²-coefficients of an
    /// element of `E_s*` to `E_s`.
    pub fn ds_apply(&self, z: &PairField) -> PairField {
        PairField {
            u: fractional_power_apply(&self.spectrum, &z.u, -2.0 * self.s),
            v: fractional_power_apply(&self.spectrum, &z.v, -2.0 * (1.0 - self.s)),
        }
    }

    /// `L(u, v) = (Dv, Du)`.
    pub fn l_apply(&self, z: &PairField) -> PairField {
        let lam = self.spectrum.mode_eigenvalues();
        PairField {
            u: z.v.iter().zip(lam).map(|(b, l)| b * *l).collect(),
            v: z.u.iter().zip(lam).map(|(a, l)| a * *l).collect(),
        }
    }

    pub fn ds_l_apply(&self, z: &PairField) -> PairField {
        self.ds_apply(&self.l_apply(z))
    }

    /// Projection onto `E₊` (`positive = true`) or `E₋`: `P± = ½(I ± 𝒟ₛL)`.
    pub fn project(&self, z: &PairField, positive: bool) -> PairField {
        let sign = if positive { 1.0 } else { -1.0 };
        z.scaled(0.5).add_scaled(0.5 * sign, &self.ds_l_apply(z))
    }

    /// ℰ-orthonormal coordinates of `w`.
    pub fn coords(&self, w: &ExtendedPoint) -> DVector<f64> {
        let n = self.num_modes();
        let mut x = DVector::zeros(self.dim());
        for i in 0..n {
            x[2 * i] = w.z.u[i].re * self.u_weight[i];
            x[2 * i + 1] = w.z.u[i].im * self.u_weight[i];
            x[2 * n + 2 * i] = w.z.v[i].re * self.v_weight[i];
            x[2 * n + 2 * i + 1] = w.z.v[i].im * self.v_weight[i];
        }
        x[4 * n] = w.lambda;
        x
    }

    /// Inverse of [`coords`](Self::coords).
    pub fn point(&self, x: &DVector<f64>) -> ExtendedPoint {
        let n = self.num_modes();
        assert_eq!(x.len(), self.dim(), "coordinate vector has wrong length");
        let mut z = PairField::zeros(n);
        for i in 0..n {
            z.u[i] = Complex64::new(x[2 * i], x[2 * i + 1]) / self.u_weight[i];
            z.v[i] = Complex64::new(x[2 * n + 2 * i], x[2 * n + 2 * i + 1]) / self.v_weight[i];
        }
        ExtendedPoint::new(z, x[4 * n])
    }

    /// Coordinates of the ℰ-gradient of the linear functional
    /// `ξ ↦ (r, ξ_z)_{L²} + c ξ_λ`, i.e. of `(𝒟ₛ r, c)`.
    pub(crate) fn dual_coords(&self, r: &PairField, c: f64) -> DVector<f64> {
        let n = self.num_modes();
        let mut x = DVector::zeros(self.dim());
        for i in 0..n {
            x[2 * i] = r.u[i].re / self.u_weight[i];
            x[2 * i + 1] = r.u[i].im / self.u_weight[i];
            x[2 * n + 2 * i] = r.v[i].re / self.v_weight[i];
            x[2 * n + 2 * i + 1] = r.v[i].im / self.v_weight[i];
        }
        x[4 * n] = c;
        x
    }

    /// Unit ℰ-vector along coordinate `j`, as a field (tangent vector).
    pub fn basis_vector(&self, j: usize) -> ExtendedPoint {
        let mut x = DVector::zeros(self.dim());
        x[j] = 1.0;
        self.point(&x)
    }
}
