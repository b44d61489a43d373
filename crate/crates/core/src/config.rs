//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! s = "auto"                  # or a number in (0, 1)
//! truncation = [8, 12, 16]    # complex D-modes per truncation
//! window = [-13, 13]
//!
//! [spectrum]
//! model = "circle"            # or "synthetic" with eigenvalues = [[λ, m], ...]
//! modes = 16
//!
//! [nonlinearity]
//! kind = "power"              # or "quadratic"
//! f = 1.0                     # number or list of samples over the circle
//! g = 1.0
//! p = 3.0
//! q = 3.0
//! ```
//!
//! Every table is optional; missing fields take the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::critical::NewtonSettings;
use crate::error::{Error, Result};
use crate::flow::FlowSettings;
use crate::functional::FunctionalContext;
use crate::nonlinearity::{select_s, Coefficient, H4Settings, HypothesisCheck, HypothesisConstants, NonlinearitySpec};
use crate::spectral::Spectrum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    #[serde(default)]
    pub threads: usize,
    #[serde(default)]
    pub s: SChoice,
    #[serde(default = "default_truncation")]
    pub truncation: Vec<usize>,
    #[serde(default = "default_window")]
    pub window: (i64, i64),
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub nonlinearity: NonlinearityConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub homotopy: HomotopyConfig,
    #[serde(default)]
    pub hypotheses: HypothesesConfig,
    #[serde(default)]
    pub newton: NewtonConfig,
    #[serde(default)]
    pub critical: CriticalConfig,
    #[serde(default)]
    pub complex: ComplexConfig,
    #[serde(default)]
    pub grad_check: GradCheckConfig,
}

fn default_truncation() -> Vec<usize> {
    vec![8, 12, 16]
}

fn default_window() -> (i64, i64) {
    (-13, 13)
}

impl Default for RunConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config takes defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SChoice {
    Value(f64),
    Auto(String),
}

impl Default for SChoice {
    fn default() -> Self {
        SChoice::Value(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub model: String,
    /// Number of complex D-modes (circle model).
    pub modes: Option<usize>,
    /// `[λ, multiplicity]` pairs (synthetic model).
    pub eigenvalues: Option<Vec<(f64, usize)>>,
    /// Base dimension `n` used for exponent selection.
    pub dimension: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            model: "circle".into(),
            modes: Some(16),
            eigenvalues: None,
            dimension: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub kind: String,
    pub f: Option<Coefficient>,
    pub g: Option<Coefficient>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub scale: f64,
    pub constants: Option<HypothesisConstants>,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        Self {
            kind: "quadratic".into(),
            f: None,
            g: None,
            p: None,
            q: None,
            scale: 1.0,
            constants: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub horizon: f64,
    /// `"origin"`: `(0, lambda0)`; `"critical"`: `p_k⁺` of the quadratic
    /// problem at `k`, displaced by `noise`.
    pub start: String,
    pub lambda0: f64,
    pub k: i64,
    pub noise: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        let f = FlowSettings::default();
        Self {
            rtol: f.rtol,
            atol: f.atol,
            max_step: f.max_step,
            horizon: 1.0,
            start: "origin".into(),
            lambda0: 1.0,
            k: 1,
            noise: 0.0,
        }
    }
}

impl FlowConfig {
    pub fn settings(&self) -> FlowSettings {
        FlowSettings {
            rtol: self.rtol,
            atol: self.atol,
            max_step: self.max_step,
            ..FlowSettings::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomotopyConfig {
    /// The end Hamiltonian is the configured one with its scale multiplied by this.
    pub end_scale: f64,
    pub epsilon: f64,
    pub horizon: f64,
}

impl Default for HomotopyConfig {
    fn default() -> Self {
        Self {
            end_scale: 1.001,
            epsilon: 1.0,
            horizon: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HypothesesConfig {
    pub samples: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    pub h4: bool,
    pub h4_level: f64,
    pub h4_samples: usize,
}

impl Default for HypothesesConfig {
    fn default() -> Self {
        let c = HypothesisCheck::default();
        let h = H4Settings::default();
        Self {
            samples: c.samples,
            min_radius: c.min_radius,
            max_radius: c.max_radius,
            h4: false,
            h4_level: h.level,
            h4_samples: h.samples,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NewtonConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        let n = NewtonSettings::default();
        Self {
            tol: n.tol,
            max_iter: n.max_iter,
        }
    }
}

impl NewtonConfig {
    pub fn settings(&self) -> NewtonSettings {
        NewtonSettings {
            tol: self.tol,
            max_iter: self.max_iter,
            ..NewtonSettings::default()
        }
    }
}

/// Initial guess for non-quadratic problems: amplitude `amplitude` on the
/// mode with eigenvalue `mode_eigenvalue` in both components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticalConfig {
    pub mode_eigenvalue: f64,
    pub amplitude: f64,
    pub lambda: f64,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        Self {
            mode_eigenvalue: std::f64::consts::PI,
            amplitude: 1.0,
            lambda: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComplexConfig {
    /// `"analytic"` (closed-form indices) or `"numeric"` (Newton + truncated indices).
    pub grading: String,
}

impl Default for ComplexConfig {
    fn default() -> Self {
        Self {
            grading: "analytic".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckConfig {
    pub points: usize,
    pub step: f64,
    pub amplitude: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            points: 20,
            step: 1e-6,
            amplitude: 0.5,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Toml(t) => Error::Config(format!("{}: {t}", path.display())),
            other => other,
        })
    }

    /// Semantic checks that parsing cannot express; each message names the field.
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::Config(format!("{field}: {msg}")));
        if let SChoice::Auto(a) = &self.s {
            if a != "auto" {
                return bad("s", format!("expected a number or \"auto\", got {a:?}"));
            }
        }
        if let SChoice::Value(v) = self.s {
            if !(v > 0.0 && v < 1.0) {
                return bad("s", format!("must lie in (0, 1), got {v}"));
            }
        }
        if self.truncation.is_empty() || self.truncation.contains(&0) {
            return bad("truncation", "needs positive mode counts".into());
        }
        if self.window.0 > self.window.1 {
            return bad(
                "window",
                format!("lower end {} exceeds upper end {}", self.window.0, self.window.1),
            );
        }
        self.spectrum()?;
        self.nonlinearity_spec()?;
        if !(self.flow.horizon > 0.0) {
            return bad("flow.horizon", "must be positive".into());
        }
        if !["origin", "critical"].contains(&self.flow.start.as_str()) {
            return bad(
                "flow.start",
                format!("expected \"origin\" or \"critical\", got {:?}", self.flow.start),
            );
        }
        if !["analytic", "numeric"].contains(&self.complex.grading.as_str()) {
            return bad(
                "complex.grading",
                format!("expected \"analytic\" or \"numeric\", got {:?}", self.complex.grading),
            );
        }
        if !(self.homotopy.end_scale > 0.0) {
            return bad("homotopy.end_scale", "must be positive".into());
        }
        if self.hypotheses.samples == 0
            || !(self.hypotheses.min_radius > 0.0 && self.hypotheses.max_radius > self.hypotheses.min_radius)
        {
            return bad("hypotheses", "needs samples > 0 and 0 < min_radius < max_radius".into());
        }
        Ok(())
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let sc = &self.spectrum;
        match sc.model.as_str() {
            "circle" => {
                let modes = sc
                    .modes
                    .ok_or_else(|| Error::Config("spectrum.modes: required for the circle model".into()))?;
                if modes == 0 || modes % 2 != 0 {
                    return Err(Error::Config(format!(
                        "spectrum.modes: the circle model needs an even positive count, got {modes}"
                    )));
                }
                Spectrum::circle(modes / 2)
            }
            "synthetic" => {
                let eig = sc
                    .eigenvalues
                    .clone()
                    .ok_or_else(|| Error::Config("spectrum.eigenvalues: required for the synthetic model".into()))?;
                Spectrum::synthetic(eig).map_err(|e| Error::Config(format!("spectrum.eigenvalues: {e}")))
            }
            other => Err(Error::Config(format!(
                "spectrum.model: expected \"circle\" or \"synthetic\", got {other:?}"
            ))),
        }
    }

    pub fn nonlinearity_spec(&self) -> Result<NonlinearitySpec> {
        let nc = &self.nonlinearity;
        let spec = match nc.kind.as_str() {
            "quadratic" => NonlinearitySpec::quadratic(),
            "power" => {
                let need = |v: Option<f64>, name: &str| {
                    v.ok_or_else(|| Error::Config(format!("nonlinearity.{name}: required for kind = \"power\"")))
                };
                let (p, q) = (need(nc.p, "p")?, need(nc.q, "q")?);
                let f = nc.f.clone().unwrap_or(Coefficient::Constant(1.0));
                let g = nc.g.clone().unwrap_or(Coefficient::Constant(1.0));
                NonlinearitySpec::power(f, g, p, q).map_err(|e| Error::Config(format!("nonlinearity: {e}")))?
            }
            other => {
                return Err(Error::Config(format!(
                    "nonlinearity.kind: expected \"quadratic\" or \"power\", got {other:?}"
                )))
            }
        };
        if !(nc.scale > 0.0 && nc.scale.is_finite()) {
            return Err(Error::Config(format!(
                "nonlinearity.scale: must be positive, got {}",
                nc.scale
            )));
        }
        let mut spec = spec.with_scale(nc.scale);
        if let Some(c) = nc.constants {
            spec = spec.with_constants(c);
        }
        spec.validate()
            .map_err(|e| Error::Config(format!("nonlinearity: {e}")))?;
        Ok(spec)
    }

    /// The fractional exponent, solving the exponent condition when `s = "auto"`.
    pub fn resolve_s(&self) -> Result<f64> {
        match self.s {
            SChoice::Value(v) => Ok(v),
            SChoice::Auto(_) => {
                let (p, q) = self.nonlinearity_spec()?.exponents();
                if p <= 1.0 || q <= 1.0 {
                    // quadratic growth: every s in (0, 1) is admissible
                    return Ok(0.5);
                }
                Ok(select_s(self.spectrum.dimension, p, q)?.s)
            }
        }
    }

    pub fn context(&self) -> Result<FunctionalContext> {
        FunctionalContext::from_parts(self.spectrum()?, self.resolve_s()?, self.nonlinearity_spec()?)
    }

    pub fn hypothesis_check(&self) -> HypothesisCheck {
        HypothesisCheck {
            samples: self.hypotheses.samples,
            min_radius: self.hypotheses.min_radius,
            max_radius: self.hypotheses.max_radius,
            seed: self.seed,
        }
    }

    pub fn h4_settings(&self) -> H4Settings {
        H4Settings {
            level: self.hypotheses.h4_level,
            samples: self.hypotheses.h4_samples,
            seed: self.seed,
            bound: None,
        }
    }
}
