use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::PairField;
use crate::error::{Error, Result};

/// Eigenvalues closer than this are treated as equal when matching modes
/// across truncations or building the doubled spectrum.
pub(crate) const EIGEN_MATCH_TOL: f64 = 1e-9;

/// Where the eigenvalue data of the Dirac operator comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumModel {
    /// Circle of circumference one with the antiperiodic spin structure.
    Circle { num_modes: usize },
    /// User-supplied eigenvalue list without an underlying geometry.
    Synthetic,
}

/// Truncated spectrum of the Dirac operator `D`.
///
/// Eigenvalues are stored strictly increasing with complex multiplicities.
/// The flattened *mode* list repeats each eigenvalue according to its
/// multiplicity; spectral coefficients of spinor fields are indexed by mode.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    model: SpectrumModel,
    eigenvalues: Vec<(f64, usize)>,
    modes: Vec<f64>,
}

impl Spectrum {
    /// Circle spectrum `{2π(j + ½) : -num_modes ≤ j < num_modes}`, each of
    /// multiplicity one.
    pub fn circle(num_modes: usize) -> Result<Self> {
        if num_modes == 0 {
            return Err(Error::InvalidSpectrum("circle model needs at least one mode".into()));
        }
        let n = num_modes as i64;
        let eigenvalues = (-n..n).map(|j| (2.0 * PI * (j as f64 + 0.5), 1)).collect::<Vec<_>>();
        Ok(Self::from_parts(SpectrumModel::Circle { num_modes }, eigenvalues))
    }

    /// Synthetic spectrum from `(eigenvalue, multiplicity)` pairs in any order.
    pub fn synthetic(mut eigenvalues: Vec<(f64, usize)>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::InvalidSpectrum("empty eigenvalue list".into()));
        }
        for &(value, mult) in &eigenvalues {
            if !value.is_finite() {
                return Err(Error::InvalidSpectrum(format!("non-finite eigenvalue {value}")));
            }
            if value == 0.0 {
                return Err(Error::InvalidSpectrum(
                    "0 is an eigenvalue; the Dirac operator must be invertible".into(),
                ));
            }
            if mult == 0 {
                return Err(Error::InvalidSpectrum(format!("eigenvalue {value} has multiplicity 0")));
            }
        }
        eigenvalues.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = eigenvalues
            .windows(2)
            .find(|w| (w[1].0 - w[0].0).abs() <= EIGEN_MATCH_TOL)
        {
            return Err(Error::InvalidSpectrum(format!(
                "eigenvalue {} listed twice; merge it into one multiplicity",
                w[0].0
            )));
        }
        Ok(Self::from_parts(SpectrumModel::Synthetic, eigenvalues))
    }

    fn from_parts(model: SpectrumModel, eigenvalues: Vec<(f64, usize)>) -> Self {
        let modes = eigenvalues
            .iter()
            .flat_map(|&(v, m)| std::iter::repeat_n(v, m))
            .collect();
        Self {
            model,
            eigenvalues,
            modes,
        }
    }

    pub fn model(&self) -> SpectrumModel {
        self.model
    }

    pub fn is_circle(&self) -> bool {
        matches!(self.model, SpectrumModel::Circle { .. })
    }

    /// Distinct eigenvalues with complex multiplicities, increasing.
    pub fn eigenvalues(&self) -> &[(f64, usize)] {
        &self.eigenvalues
    }

    /// Eigenvalue attached to every complex mode.
    pub fn mode_eigenvalues(&self) -> &[f64] {
        &self.modes
    }

    /// Number of complex modes in the truncation window.
    pub fn num_modes(&self) -> usize {
        self.modes.len()
    }

    /// Multiplicity of `value` in `D`, zero when absent.
    pub fn multiplicity_of(&self, value: f64) -> usize {
        self.eigenvalues
            .iter()
            .find(|(v, _)| (v - value).abs() <= EIGEN_MATCH_TOL * value.abs().max(1.0))
            .map_or(0, |&(_, m)| m)
    }

    /// Keep the `count` complex modes of smallest `|λ|`.
    ///
    /// The cut must not split an eigenspace (or, on the circle, a `±` pair).
    pub fn truncated(&self, count: usize) -> Result<Self> {
        if count == 0 || count > self.num_modes() {
            return Err(Error::InvalidSpectrum(format!(
                "truncation to {count} modes outside 1..={}",
                self.num_modes()
            )));
        }
        if let SpectrumModel::Circle { .. } = self.model {
            if !count.is_multiple_of(2) {
                return Err(Error::InvalidSpectrum(format!(
                    "circle truncations keep ± pairs; {count} is odd"
                )));
            }
            return Self::circle(count / 2);
        }
        let mut blocks = self.eigenvalues.clone();
        blocks.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
        let mut kept = Vec::new();
        let mut total = 0;
        for (v, m) in blocks {
            if total + m > count {
                break;
            }
            total += m;
            kept.push((v, m));
        }
        if total != count {
            return Err(Error::InvalidSpectrum(format!(
                "truncation to {count} modes would split an eigenspace"
            )));
        }
        Self::synthetic(kept)
    }

    /// For every mode of `self`, the index of the matching mode in `target`
    /// (same eigenvalue, same slot within the eigenspace).
    pub fn mode_map_into(&self, target: &Spectrum) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.num_modes());
        let mut offset_self = 0;
        for &(value, mult) in &self.eigenvalues {
            let mut offset_target = 0;
            let mut found = None;
            for &(tv, tm) in &target.eigenvalues {
                if (tv - value).abs() <= EIGEN_MATCH_TOL * value.abs().max(1.0) {
                    found = Some((offset_target, tm));
                    break;
                }
                offset_target += tm;
            }
            for slot in 0..mult {
                out.push(match found {
                    Some((start, tm)) if slot < tm => Some(start + slot),
                    _ => None,
                });
            }
            offset_self += mult;
        }
        debug_assert_eq!(offset_self, out.len());
        out
    }

    /// Re-express `field` (over `self`) in the mode basis of `target`.
    /// Fails when `field` has weight above `rel_tol · ‖field‖_{L²}` on modes
    /// `target` does not carry; smaller weights are dropped.
    pub fn transfer_field(&self, field: &PairField, target: &Spectrum, rel_tol: f64) -> Result<PairField> {
        let map = self.mode_map_into(target);
        let cutoff = rel_tol * field.l2_norm_sq().sqrt();
        let mut out = PairField::zeros(target.num_modes());
        for (i, slot) in map.iter().enumerate() {
            match slot {
                Some(j) => {
                    out.u[*j] = field.u[i];
                    out.v[*j] = field.v[i];
                }
                None => {
                    if field.u[i].norm() > cutoff || field.v[i].norm() > cutoff {
                        return Err(Error::Domain(format!(
                            "field has weight on mode {} (λ = {}) outside the target window",
                            i, self.modes[i]
                        )));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Spectrum of the doubled operator `L(u, v) = (Dv, Du)`.
    pub fn l_spectrum(&self) -> LSpectrum {
        let mut magnitudes: Vec<f64> = Vec::new();
        for &(v, _) in &self.eigenvalues {
            let a = v.abs();
            if !magnitudes.iter().any(|m| (m - a).abs() <= EIGEN_MATCH_TOL * a.max(1.0)) {
                magnitudes.push(a);
            }
        }
        magnitudes.sort_by(f64::total_cmp);
        let level = |mu: f64| self.multiplicity_of(mu) + self.multiplicity_of(-mu);
        let positive = magnitudes.iter().map(|&a| (a, level(a))).collect();
        let negative = magnitudes.iter().map(|&a| (-a, level(-a))).collect();
        LSpectrum { positive, negative }
    }

    /// Eigenvectors of `L` for eigenvalue `mu`, each with L²-norm √2:
    /// `(φ, φ)` for `Dφ = μφ` and `(φ, -φ)` for `Dφ = -μφ`.
    pub fn l_eigenvectors(&self, mu: f64) -> Vec<PairField> {
        let n = self.num_modes();
        let tol = EIGEN_MATCH_TOL * mu.abs().max(1.0);
        let mut out = Vec::new();
        for (i, &lam) in self.modes.iter().enumerate() {
            let sign = if (lam - mu).abs() <= tol {
                1.0
            } else if (lam + mu).abs() <= tol {
                -1.0
            } else {
                continue;
            };
            let mut z = PairField::zeros(n);
            z.u[i] = Complex64::new(1.0, 0.0);
            z.v[i] = Complex64::new(sign, 0.0);
            out.push(z);
        }
        out
    }
}

/// Spectrum of `L`, indexed by `k ∈ ℤ \ {0}` with `λ̄_{-1} < 0 < λ̄_1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LSpectrum {
    /// `k = 1, 2, …` in increasing order.
    positive: Vec<(f64, usize)>,
    /// `k = -1, -2, …` in decreasing order.
    negative: Vec<(f64, usize)>,
}

impl LSpectrum {
    /// Build directly from per-level data; used for synthetic index studies.
    pub fn from_levels(positive: Vec<(f64, usize)>, negative: Vec<(f64, usize)>) -> Result<Self> {
        if positive.is_empty() && negative.is_empty() {
            return Err(Error::InvalidSpectrum("empty L-spectrum".into()));
        }
        if positive.iter().any(|&(v, m)| v <= 0.0 || m == 0) || negative.iter().any(|&(v, m)| v >= 0.0 || m == 0) {
            return Err(Error::InvalidSpectrum(
                "L-levels must have the right sign and positive multiplicity".into(),
            ));
        }
        Ok(Self { positive, negative })
    }

    fn level(&self, k: i64) -> Option<(f64, usize)> {
        match k {
            0 => None,
            k if k > 0 => self.positive.get(k as usize - 1).copied(),
            k => self.negative.get((-k) as usize - 1).copied(),
        }
    }

    pub fn eigenvalue(&self, k: i64) -> Option<f64> {
        self.level(k).map(|l| l.0)
    }

    pub fn multiplicity(&self, k: i64) -> Option<usize> {
        self.level(k).map(|l| l.1)
    }

    /// Largest positive index present.
    pub fn max_k(&self) -> i64 {
        self.positive.len() as i64
    }

    /// Most negative index present.
    pub fn min_k(&self) -> i64 {
        -(self.negative.len() as i64)
    }

    /// Every `k` in increasing eigenvalue order.
    pub fn indices(&self) -> Vec<i64> {
        (self.min_k()..=self.max_k()).filter(|&k| k != 0).collect()
    }

    /// `(k, λ̄_k, m_k)` in increasing eigenvalue order.
    pub fn levels(&self) -> Vec<(i64, f64, usize)> {
        self.indices()
            .into_iter()
            .map(|k| {
                let (v, m) = self.level(k).expect("index in range");
                (k, v, m)
            })
            .collect()
    }
}

/// On-disk spectrum description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumFile {
    pub model: String,
    pub eigenvalues: Vec<(f64, usize)>,
}

impl From<&Spectrum> for SpectrumFile {
    fn from(s: &Spectrum) -> Self {
        SpectrumFile {
            model: match s.model {
                SpectrumModel::Circle { .. } => "circle".into(),
                SpectrumModel::Synthetic => "synthetic".into(),
            },
            eigenvalues: s.eigenvalues.clone(),
        }
    }
}

impl TryFrom<SpectrumFile> for Spectrum {
    type Error = Error;

    fn try_from(file: SpectrumFile) -> Result<Self> {
        match file.model.as_str() {
            "circle" => {
                let count = file.eigenvalues.len();
                if count == 0 || !count.is_multiple_of(2) {
                    return Err(Error::InvalidSpectrum(
                        "circle spectra carry an even, nonzero number of eigenvalues".into(),
                    ));
                }
                let circle = Spectrum::circle(count / 2)?;
                let matches = circle
                    .eigenvalues
                    .iter()
                    .zip(&file.eigenvalues)
                    .all(|(a, b)| a.1 == b.1 && (a.0 - b.0).abs() <= 1e-9 * a.0.abs());
                if !matches {
                    return Err(Error::InvalidSpectrum(
                        "eigenvalues do not match the circle model 2π(j + ½)".into(),
                    ));
                }
                Ok(circle)
            }
            "synthetic" => Spectrum::synthetic(file.eigenvalues),
            other => Err(Error::InvalidSpectrum(format!("unknown model {other:?}"))),
        }
    }
}

impl Serialize for Spectrum {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SpectrumFile::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Spectrum {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let file = SpectrumFile::deserialize(deserializer)?;
        Spectrum::try_from(file).map_err(serde::de::Error::custom)
    }
}
