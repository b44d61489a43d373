//! Negative gradient flows of the action: autonomous, perturbed, and the
//! nonautonomous continuation between two Hamiltonians.
//!
//! The truncated flow is an ODE in the ℰ-orthonormal coordinates, integrated
//! with the embedded Dormand-Prince 5(4) pair.

use std::io::Write;

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::FunctionalContext;
use crate::perturbation::PerturbationMap;
use crate::spectral::ExtendedPoint;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowSettings {
    pub rtol: f64,
    pub atol: f64,
    pub initial_step: f64,
    pub max_step: f64,
    /// Steps shorter than this (relative to `max(1, |t|)`) abort the run.
    pub min_step: f64,
    /// `‖∇𝒜‖_ℰ` below which a state counts as stationary.
    pub stationary_threshold: f64,
    /// Consecutive stationary accepted steps that stop the run.
    pub stationary_steps: usize,
    pub stop_on_convergence: bool,
    /// Abort when `‖w‖_ℰ` exceeds this.
    pub divergence_bound: f64,
    pub max_steps: usize,
}

impl Default for FlowSettings {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            initial_step: 1e-3,
            max_step: 0.05,
            min_step: 1e-13,
            stationary_threshold: 1e-9,
            stationary_steps: 10,
            stop_on_convergence: true,
            divergence_bound: 1e6,
            max_steps: 200_000,
        }
    }
}

impl FlowSettings {
    fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.initial_step > 0.0 && self.max_step > 0.0) {
            return Err(Error::Config("integrator tolerances and steps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Horizon,
    Converged,
    Diverged,
    StepLimit,
    /// The step size collapsed; only carried by partial trajectories.
    Stalled,
}

/// A sampled flow line with per-sample diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ExtendedPoint>,
    /// `𝒜(w(t_i))` (of `H_t` for homotopies).
    pub actions: Vec<f64>,
    /// `‖∇^K𝒜‖_ℰ`.
    pub grad_norms: Vec<f64>,
    /// `‖∇^K𝒜‖²_{g^K} = (∇𝒜, (I+K)∇𝒜)_ℰ`, the dissipation rate.
    pub dissipation: Vec<f64>,
    /// `∫₀^{t_i}` of the dissipation rate, accumulated with the stage weights
    /// of each accepted step.
    pub dissipated: Vec<f64>,
    pub z_norms: Vec<f64>,
    /// Accepted step sizes.
    pub steps: Vec<f64>,
    pub rejected: usize,
    pub termination: Termination,
}

impl FlowTrajectory {
    fn empty() -> Self {
        Self {
            times: vec![],
            states: vec![],
            actions: vec![],
            grad_norms: vec![],
            dissipation: vec![],
            dissipated: vec![],
            z_norms: vec![],
            steps: vec![],
            rejected: 0,
            termination: Termination::Horizon,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    pub fn final_state(&self) -> &ExtendedPoint {
        self.states.last().expect("trajectory has at least the initial state")
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectory has at least the initial state")
    }

    /// Largest increase `𝒜(t_{i+1}) - 𝒜(t_i)` (non-positive for a monotone run).
    pub fn max_action_increase(&self) -> f64 {
        self.actions
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_action_monotone(&self, tol: f64) -> bool {
        self.len() < 2 || self.max_action_increase() <= tol
    }

    pub fn sup_z_norm(&self) -> f64 {
        self.z_norms.iter().copied().fold(0.0, f64::max)
    }

    pub fn sup_lambda(&self) -> f64 {
        self.states.iter().map(|w| w.lambda.abs()).fold(0.0, f64::max)
    }

    /// CSV with columns `t, action, grad_norm, lambda, z_norm_Es`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,action,grad_norm,lambda,z_norm_Es")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.times[i], self.actions[i], self.grad_norms[i], self.states[i].lambda, self.z_norms[i]
            )?;
        }
        Ok(())
    }
}

/// Evaluation of the vector field at one state.
struct FieldValue {
    /// `-(I + K)∇𝒜` in coordinates.
    velocity: DVector<f64>,
    action: f64,
    grad_norm: f64,
    dissipation: f64,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn integrate<F>(
    ctx: &FunctionalContext,
    field: F,
    start: &ExtendedPoint,
    t0: f64,
    t1: f64,
    settings: &FlowSettings,
) -> Result<FlowTrajectory>
where
    F: Fn(f64, &DVector<f64>) -> Result<FieldValue>,
{
    settings.validate()?;
    let space = ctx.space();
    let mut traj = FlowTrajectory::empty();
    let mut t = t0;
    let mut x = space.coords(start);
    let mut fx = field(t, &x)?;
    let record = |traj: &mut FlowTrajectory, t: f64, x: &DVector<f64>, f: &FieldValue| {
        let w = space.point(x);
        traj.times.push(t);
        traj.z_norms.push(space.es_norm(&w.z));
        traj.states.push(w);
        traj.actions.push(f.action);
        traj.grad_norms.push(f.grad_norm);
        traj.dissipation.push(f.dissipation);
    };
    record(&mut traj, t, &x, &fx);
    traj.dissipated.push(0.0);

    let mut h = settings.initial_step.min(settings.max_step).min((t1 - t0).max(0.0));
    let mut stationary = usize::from(fx.grad_norm < settings.stationary_threshold);
    let mut k: Vec<DVector<f64>> = Vec::with_capacity(7);
    while t < t1 {
        if settings.stop_on_convergence && stationary >= settings.stationary_steps {
            traj.termination = Termination::Converged;
            return Ok(traj);
        }
        if traj.steps.len() >= settings.max_steps {
            traj.termination = Termination::StepLimit;
            return Ok(traj);
        }
        h = h.min(t1 - t);
        k.clear();
        k.push(fx.velocity.clone());
        let mut stage_dissipation = [fx.dissipation; 7];
        let mut last = None;
        for stage in 1..7 {
            let mut y = x.clone();
            for (j, kj) in k.iter().enumerate() {
                if A[stage][j] != 0.0 {
                    y.axpy(h * A[stage][j], kj, 1.0);
                }
            }
            let f = field(t + C[stage] * h, &y)?;
            k.push(f.velocity.clone());
            stage_dissipation[stage] = f.dissipation;
            if stage == 6 {
                last = Some((y, f));
            }
        }
        let (x_new, f_new) = last.expect("seven stages evaluated");
        let mut err_sq = 0.0;
        for i in 0..x.len() {
            let e: f64 = (0..7).map(|s| (B5[s] - B4[s]) * k[s][i]).sum::<f64>() * h;
            let scale = settings.atol + settings.rtol * x[i].abs().max(x_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / x.len() as f64).sqrt();
        if err <= 1.0 {
            let step_dissipation: f64 = (0..7).map(|s| B5[s] * stage_dissipation[s]).sum::<f64>() * h;
            let total = traj.dissipated.last().copied().unwrap_or(0.0) + step_dissipation;
            traj.dissipated.push(total);
            t += h;
            x = x_new;
            fx = f_new;
            traj.steps.push(h);
            record(&mut traj, t, &x, &fx);
            stationary = if fx.grad_norm < settings.stationary_threshold {
                stationary + 1
            } else {
                0
            };
            if x.norm() > settings.divergence_bound {
                traj.termination = Termination::Diverged;
                return Ok(traj);
            }
        } else {
            traj.rejected += 1;
        }
        let factor = if err == 0.0 {
            5.0
        } else if err.is_finite() {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            0.2
        };
        h = (h * factor).min(settings.max_step);
        if h < settings.min_step * t.abs().max(1.0) && t < t1 {
            traj.termination = Termination::Stalled;
            return Err(Error::Stiffness {
                t,
                step: h,
                partial: Box::new(traj),
            });
        }
    }
    traj.termination = Termination::Horizon;
    Ok(traj)
}

fn autonomous_field<'a>(
    ctx: &'a FunctionalContext,
    pert: Option<&'a PerturbationMap>,
) -> impl Fn(f64, &DVector<f64>) -> Result<FieldValue> + 'a {
    move |_, x| {
        let w = ctx.space().point(x);
        let g = ctx.gradient_coords(&w)?;
        let action = ctx.action(&w)?;
        let gk = match pert {
            Some(p) => p.apply_metric(x, &g),
            None => g.clone(),
        };
        Ok(FieldValue {
            grad_norm: gk.norm(),
            dissipation: g.dot(&gk),
            velocity: -gk,
            action,
        })
    }
}

/// Integrate `dw/dt = -(I + K(w))∇𝒜_H(w)` from `start` over `[0, horizon]`.
pub fn integrate_flow(
    ctx: &FunctionalContext,
    pert: Option<&PerturbationMap>,
    start: &ExtendedPoint,
    horizon: f64,
    settings: &FlowSettings,
) -> Result<FlowTrajectory> {
    if let Some(p) = pert {
        p.validate()?;
        if p.dim != ctx.dim() {
            return Err(Error::Config(
                "perturbation dimension does not match the context".into(),
            ));
        }
    }
    integrate(ctx, autonomous_field(ctx, pert), start, 0.0, horizon, settings)
}

/// Composite Simpson rule on a nonuniform grid; a trailing odd interval is
/// integrated with the quadratic through the last three nodes.
pub fn simpson_nonuniform(t: &[f64], f: &[f64]) -> f64 {
    assert_eq!(t.len(), f.len());
    let n = t.len();
    if n < 2 {
        return 0.0;
    }
    if n == 2 {
        return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
    }
    let mut acc = 0.0;
    let mut i = 0;
    while i + 2 < n {
        let (h0, h1) = (t[i + 1] - t[i], t[i + 2] - t[i + 1]);
        let s = h0 + h1;
        acc += s / 6.0 * ((2.0 - h1 / h0) * f[i] + s * s / (h0 * h1) * f[i + 1] + (2.0 - h0 / h1) * f[i + 2]);
        i += 2;
    }
    if i + 1 < n {
        let (h0, h1) = (t[n - 2] - t[n - 3], t[n - 1] - t[n - 2]);
        let s = h0 + h1;
        acc += -h1.powi(3) / (6.0 * h0 * s) * f[n - 3]
            + h1 * (h1 + 3.0 * h0) / (6.0 * h0) * f[n - 2]
            + h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * s) * f[n - 1];
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    /// `𝒜(w(t₀)) - 𝒜(w(t_N))`.
    pub action_drop: f64,
    /// `∫‖∇^K𝒜‖²_{g^K} dt`.
    pub dissipation: f64,
    /// `∫‖∇^K𝒜‖²_ℰ dt`, differing from the above when `K ≠ 0`.
    pub dissipation_euclidean: f64,
    pub defect: f64,
    /// `defect / max(|action_drop|, dissipation)`.
    pub relative_defect: f64,
}

impl EnergyReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.relative_defect < tol
    }
}

pub fn energy_identity_check(traj: &FlowTrajectory) -> EnergyReport {
    let drop = traj.actions.first().copied().unwrap_or(0.0) - traj.actions.last().copied().unwrap_or(0.0);
    let dissipation = match traj.dissipated.last() {
        Some(&d) if traj.dissipated.len() == traj.len() => d,
        _ => simpson_nonuniform(&traj.times, &traj.dissipation),
    };
    let sq: Vec<f64> = traj.grad_norms.iter().map(|g| g * g).collect();
    let euclid = simpson_nonuniform(&traj.times, &sq);
    let defect = (drop - dissipation).abs();
    let spread = drop.abs().max(dissipation.abs());
    EnergyReport {
        action_drop: drop,
        dissipation,
        dissipation_euclidean: euclid,
        defect,
        relative_defect: if spread > 0.0 { defect / spread } else { 0.0 },
    }
}

/// `β(t) = φ(t) / (φ(t) + φ(1-t))` with `φ(t) = e^{-1/t}` for `t > 0`.
pub fn beta(t: f64) -> f64 {
    let phi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let (a, b) = (phi(t), phi(1.0 - t));
    if a + b == 0.0 {
        0.0
    } else {
        a / (a + b)
    }
}

pub fn beta_prime(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    // β = 1 / (1 + e^{g}), g = 1/t - 1/(1-t)
    let g = 1.0 / t - 1.0 / (1.0 - t);
    let dg = -1.0 / (t * t) - 1.0 / ((1.0 - t) * (1.0 - t));
    let e = g.exp();
    if !e.is_finite() {
        return 0.0;
    }
    -dg * e / (1.0 + e).powi(2)
}

/// Continuation data `(H₀, K₀) → (H₁, K₁)` interpolated by `β`.
#[derive(Clone, Debug)]
pub struct HomotopySchedule {
    pub start: FunctionalContext,
    pub end: FunctionalContext,
    pub k_start: Option<PerturbationMap>,
    pub k_end: Option<PerturbationMap>,
    /// `ε` for the budget test `A < ε/5`.
    pub epsilon: f64,
}

impl HomotopySchedule {
    pub fn new(start: FunctionalContext, end: FunctionalContext) -> Result<Self> {
        if start.dim() != end.dim() || start.space().s() != end.space().s() {
            return Err(Error::Config("homotopy endpoints live on different spaces".into()));
        }
        Ok(Self {
            start,
            end,
            k_start: None,
            k_end: None,
            epsilon: 1.0,
        })
    }

    pub fn with_perturbations(mut self, k0: Option<PerturbationMap>, k1: Option<PerturbationMap>) -> Result<Self> {
        for k in [&k0, &k1].into_iter().flatten() {
            k.validate()?;
        }
        self.k_start = k0;
        self.k_end = k1;
        Ok(self)
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    /// Largest `β'` on a uniform grid of `samples` points in `[0, 1]`.
    pub fn max_beta_slope(samples: usize) -> f64 {
        (0..=samples)
            .map(|i| beta_prime(i as f64 / samples as f64))
            .fold(0.0, f64::max)
    }

    fn k_at(&self, b: f64, x: &DVector<f64>) -> Option<nalgebra::DMatrix<f64>> {
        let k0 = self.k_start.as_ref().map(|k| k.at(x) * (1.0 - b));
        let k1 = self.k_end.as_ref().map(|k| k.at(x) * b);
        match (k0, k1) {
            (Some(a), Some(c)) => Some(a + c),
            (a, c) => a.or(c),
        }
    }
}

/// Outcome of a continuation run.
#[derive(Clone, Debug, Serialize)]
pub struct HomotopyReport {
    pub trajectory: FlowTrajectory,
    pub sup_z_norm: f64,
    pub sup_lambda: f64,
    /// `∫ β'(t) ∫_M |H₁ - H₀|(z(t)) dx dt` along the computed trajectory.
    pub budget: f64,
    pub epsilon: f64,
    pub budget_ok: bool,
    /// Boundedness is only claimed when the budget test passes.
    pub boundedness_asserted: bool,
}

/// Integrate `dw/dt = -(I + K_t(w))∇𝒜_{H_t}(w)` over `[0, horizon]`.
///
/// Since `𝒜` and its gradient are affine in `H`, the interpolated gradient
/// is the β-combination of the endpoint gradients.
pub fn integrate_homotopy(
    schedule: &HomotopySchedule,
    start: &ExtendedPoint,
    horizon: f64,
    settings: &FlowSettings,
) -> Result<HomotopyReport> {
    let (c0, c1) = (&schedule.start, &schedule.end);
    let field = |t: f64, x: &DVector<f64>| -> Result<FieldValue> {
        let b = beta(t);
        let w = c0.space().point(x);
        let g = if b == 0.0 {
            c0.gradient_coords(&w)?
        } else if b == 1.0 {
            c1.gradient_coords(&w)?
        } else {
            c0.gradient_coords(&w)? * (1.0 - b) + c1.gradient_coords(&w)? * b
        };
        let action = (1.0 - b) * c0.action(&w)? + b * c1.action(&w)?;
        let gk = match schedule.k_at(b, x) {
            Some(k) => &g + k * &g,
            None => g.clone(),
        };
        Ok(FieldValue {
            grad_norm: gk.norm(),
            dissipation: g.dot(&gk),
            velocity: -gk,
            action,
        })
    };
    let trajectory = integrate(c0, field, start, 0.0, horizon, settings)?;
    let mut integrand = Vec::with_capacity(trajectory.len());
    for (t, w) in trajectory.times.iter().zip(&trajectory.states) {
        let bp = beta_prime(*t);
        integrand.push(if bp == 0.0 {
            0.0
        } else {
            bp * integral_abs_difference(c0, c1, &w.z)?
        });
    }
    let budget = simpson_nonuniform(&trajectory.times, &integrand);
    let budget_ok = budget < schedule.epsilon / 5.0;
    Ok(HomotopyReport {
        sup_z_norm: trajectory.sup_z_norm(),
        sup_lambda: trajectory.sup_lambda(),
        trajectory,
        budget,
        epsilon: schedule.epsilon,
        budget_ok,
        boundedness_asserted: budget_ok,
    })
}

/// `∫_M |H₁(x, z) - H₀(x, z)| dx`.
fn integral_abs_difference(
    c0: &FunctionalContext,
    c1: &FunctionalContext,
    z: &crate::spectral::PairField,
) -> Result<f64> {
    match c0.grid() {
        Some(grid) => {
            let g = grid.sample_pair(z);
            let mut acc = 0.0;
            for (m, (u, v)) in g.u.iter().zip(&g.v).enumerate() {
                let x = grid.position(m);
                acc += (c1.nonlinearity().value(x, *u, *v)? - c0.nonlinearity().value(x, *u, *v)?).abs();
            }
            Ok(acc / grid.num_points() as f64)
        }
        None => Ok((c1.integral_h(z)? - c0.integral_h(z)?).abs()),
    }
}

/// Per-point Palais-Smale diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsPoint {
    pub action: f64,
    pub grad_norm: f64,
    pub z_norm: f64,
    pub lambda_abs: f64,
    /// `(|λ| + ‖z‖) / (1 + |ε||λ| + ϵ(‖z‖ + |λ|))` with `ϵ` the z-part of the
    /// gradient and `ε = ∫H - 1`; a bounded ratio is the a-priori pattern.
    pub bound_ratio: f64,
    pub suspect: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PsDiagnostics {
    pub points: Vec<PsPoint>,
    pub max_bound_ratio: f64,
    pub suspects: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PsThresholds {
    /// Gradients below this are "small".
    pub small_gradient: f64,
    /// `‖z‖_{E_s} + |λ|` above this is "large".
    pub large_norm: f64,
}

impl Default for PsThresholds {
    fn default() -> Self {
        Self {
            small_gradient: 1e-3,
            large_norm: 1e3,
        }
    }
}

pub fn ps_diagnostics(
    ctx: &FunctionalContext,
    points: &[ExtendedPoint],
    thresholds: PsThresholds,
) -> Result<PsDiagnostics> {
    let mut out = Vec::with_capacity(points.len());
    for w in points {
        let g = ctx.gradient(w)?;
        let grad_norm = ctx.space().e_norm(&g);
        let eps_z = ctx.space().es_norm(&g.z);
        let eps_h = -g.lambda;
        let z_norm = ctx.space().es_norm(&w.z);
        let lam = w.lambda.abs();
        let ratio = (lam + z_norm) / (1.0 + eps_h.abs() * lam + eps_z * (z_norm + lam));
        out.push(PsPoint {
            action: ctx.action(w)?,
            grad_norm,
            z_norm,
            lambda_abs: lam,
            bound_ratio: ratio,
            suspect: grad_norm < thresholds.small_gradient && z_norm + lam > thresholds.large_norm,
        });
    }
    Ok(PsDiagnostics {
        max_bound_ratio: out.iter().map(|p| p.bound_ratio).fold(0.0, f64::max),
        suspects: out.iter().filter(|p| p.suspect).count(),
        points: out,
    })
}
