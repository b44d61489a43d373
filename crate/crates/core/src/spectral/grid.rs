use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{PairField, Spectrum, SpectrumModel};
use crate::error::{Error, Result};

/// Samples of a spinor pair on the uniform circle grid `t_m = m / M`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSampling {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

impl GridSampling {
    pub fn num_points(&self) -> usize {
        self.u.len()
    }
}

/// Twisted discrete Fourier transform between circle-mode coefficients and
/// grid samples.
///
/// Mode `j ∈ [-N, N)` is the antiperiodic exponential `e^{2πi(j+½)t}`. Removing
/// the half-integer phase `e^{iπt}` turns the field into an ordinary
/// trigonometric polynomial, which the FFT handles.
#[derive(Clone)]
pub struct CircleGrid {
    half_modes: usize,
    num_points: usize,
    twist: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for CircleGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CircleGrid")
            .field("half_modes", &self.half_modes)
            .field("num_points", &self.num_points)
            .finish()
    }
}

impl CircleGrid {
    pub fn new(spectrum: &Spectrum, num_points: usize) -> Result<Self> {
        let SpectrumModel::Circle { num_modes } = spectrum.model() else {
            return Err(Error::Domain(
                "grid sampling needs the circle model; synthetic spectra have no geometry".into(),
            ));
        };
        let modes = 2 * num_modes;
        if num_points < modes {
            return Err(Error::Resolution {
                points: num_points,
                modes,
                required: modes,
            });
        }
        let mut planner = FftPlanner::new();
        let twist = (0..num_points)
            .map(|m| Complex64::from_polar(1.0, PI * m as f64 / num_points as f64))
            .collect();
        Ok(Self {
            half_modes: num_modes,
            num_points,
            twist,
            forward: planner.plan_fft_forward(num_points),
            inverse: planner.plan_fft_inverse(num_points),
        })
    }

    /// Grid with `oversample` points per mode.
    pub fn oversampled(spectrum: &Spectrum, oversample: usize) -> Result<Self> {
        Self::new(spectrum, oversample.max(1) * spectrum.num_modes())
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn position(&self, m: usize) -> f64 {
        m as f64 / self.num_points as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.num_points).map(|m| self.position(m)).collect()
    }

    fn slot(&self, mode: usize) -> usize {
        let j = mode as i64 - self.half_modes as i64;
        j.rem_euclid(self.num_points as i64) as usize
    }

    /// Evaluate a single spinor field on the grid.
    pub fn to_grid(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), 2 * self.half_modes);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.num_points];
        for (i, c) in coeffs.iter().enumerate() {
            buf[self.slot(i)] = *c;
        }
        self.inverse.process(&mut buf);
        for (b, t) in buf.iter_mut().zip(&self.twist) {
            *b *= t;
        }
        buf
    }

    /// Discrete L²-projection of grid samples onto the retained modes:
    /// `c_j = (1/M) Σ_m f(t_m) conj(ψ_j(t_m))`.
    pub fn from_grid(&self, samples: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(samples.len(), self.num_points);
        let mut buf: Vec<Complex64> = samples.iter().zip(&self.twist).map(|(s, t)| s * t.conj()).collect();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.num_points as f64;
        (0..2 * self.half_modes).map(|i| buf[self.slot(i)] * scale).collect()
    }

    pub fn sample_pair(&self, z: &PairField) -> GridSampling {
        GridSampling {
            u: self.to_grid(&z.u),
            v: self.to_grid(&z.v),
        }
    }

    pub fn project_pair(&self, samples: &GridSampling) -> PairField {
        PairField {
            u: self.from_grid(&samples.u),
            v: self.from_grid(&samples.v),
        }
    }

    /// Trapezoid-rule mean over the circle (the circle has unit length).
    pub fn integrate(&self, values: impl IntoIterator<Item = f64>) -> f64 {
        values.into_iter().sum::<f64>() / self.num_points as f64
    }
}
