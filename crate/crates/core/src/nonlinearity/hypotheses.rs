use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::NonlinearitySpec;
use crate::error::Result;
use crate::spectral::{CircleGrid, EsSpace, PairField};

/// Sampling plan for the pointwise checks.
///
/// Fiber points are drawn with log-uniform modulus in
/// `[min_radius, max_radius]` and uniform direction in `ℂ² ≅ ℝ⁴`, so both the
/// small- and large-amplitude regimes are exercised.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub samples: usize,
    pub min_radius: f64,
    pub max_radius: f64,
    pub seed: u64,
}

impl Default for HypothesisCheck {
    fn default() -> Self {
        Self {
            samples: 10_000,
            min_radius: 1e-3,
            max_radius: 10.0,
            seed: 0,
        }
    }
}

/// A point `(x, u, v)` of the fiber bundle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiberWitness {
    pub x: f64,
    pub u: Complex64,
    pub v: Complex64,
}

impl HypothesisCheck {
    pub fn sample_points(&self) -> Vec<FiberWitness> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (lo, hi) = (self.min_radius.ln(), self.max_radius.ln());
        (0..self.samples)
            .map(|_| {
                let x = rng.gen::<f64>();
                let mut dir = [0.0f64; 4];
                loop {
                    dir.iter_mut().for_each(|d| *d = rng.gen_range(-1.0..1.0));
                    let n2: f64 = dir.iter().map(|d| d * d).sum();
                    if n2 > 1e-6 && n2 <= 1.0 {
                        let r = rng.gen_range(lo..=hi).exp() / n2.sqrt();
                        dir.iter_mut().for_each(|d| *d *= r);
                        break;
                    }
                }
                FiberWitness {
                    x,
                    u: Complex64::new(dir[0], dir[1]),
                    v: Complex64::new(dir[2], dir[3]),
                }
            })
            .collect()
    }
}

/// Result of one hypothesis check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisOutcome {
    pub name: String,
    pub passed: bool,
    /// Sampled evidence only, not a proof over the whole domain.
    pub heuristic: bool,
    /// The constant the hypothesis was checked against.
    pub constant: f64,
    /// Smallest constant compatible with the samples.
    pub required: f64,
    /// `constant - required`; negative on failure.
    pub worst_margin: f64,
    pub samples_used: usize,
    /// Offending point on failure.
    pub witness: Option<FiberWitness>,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub h1: HypothesisOutcome,
    pub h2: HypothesisOutcome,
    pub h3: HypothesisOutcome,
    pub h4: Option<HypothesisOutcome>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.h1.passed && self.h2.passed && self.h3.passed && self.h4.as_ref().is_none_or(|h| h.passed)
    }
}

struct Worst {
    required: f64,
    at: Option<FiberWitness>,
    used: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            required: f64::NEG_INFINITY,
            at: None,
            used: 0,
        }
    }

    fn offer(&mut self, value: f64, at: FiberWitness) {
        self.used += 1;
        if value > self.required || value.is_nan() {
            self.required = value;
            self.at = Some(at);
        }
    }

    fn finish(self, name: &str, constant: f64, detail: String) -> HypothesisOutcome {
        let required = if self.used == 0 { 0.0 } else { self.required };
        let passed = required <= constant;
        HypothesisOutcome {
            name: name.into(),
            passed,
            heuristic: false,
            constant,
            required,
            worst_margin: constant - required,
            samples_used: self.used,
            witness: if passed { None } else { self.at },
            detail,
        }
    }
}

/// Pointwise checks of (H1)-(H3) on sampled fiber points.
///
/// * (H1): `⟨H_z, z⟩ ≥ 2H - c₀`; `required` is `max(2H - ⟨H_z, z⟩)`.
/// * (H2): `required` is the largest ratio of `|H_u|`, `|H_v|` to their
///   growth envelopes.
/// * (H3): as (H2) for the Hessian blocks, skipping `|z| ≤ δ`.
pub fn check_hypotheses(spec: &NonlinearitySpec, check: &HypothesisCheck) -> Result<HypothesisReport> {
    let (p, q) = spec.exponents();
    let c = spec.constants;
    let mut h1 = Worst::new();
    let mut h2 = Worst::new();
    let mut h3 = Worst::new();
    for pt in check.sample_points() {
        let FiberWitness { x, u, v } = pt;
        let h = spec.value(x, u, v)?;
        let (hu, hv) = spec.gradient(x, u, v)?;
        let pairing = (hu * u.conj()).re + (hv * v.conj()).re;
        h1.offer(2.0 * h - pairing, pt);

        let (ru, rv) = (u.norm(), v.norm());
        let env_u = 1.0 + ru.powf(p) + rv.powf(p * (q + 1.0) / (p + 1.0));
        let env_v = 1.0 + ru.powf(q * (p + 1.0) / (q + 1.0)) + rv.powf(q);
        h2.offer((hu.norm() / env_u).max(hv.norm() / env_v), pt);

        if (ru * ru + rv * rv).sqrt() > c.delta {
            let hess = spec.hessian(x, u, v)?;
            let ratio = (hess.block_norm(0, 0) / (1.0 + ru.powf(p - 1.0)))
                .max(hess.block_norm(1, 1) / (1.0 + rv.powf(q - 1.0)))
                .max(hess.block_norm(0, 1))
                .max(hess.block_norm(1, 0));
            h3.offer(ratio, pt);
        }
    }
    let range = format!(
        "{} samples, |z| in [{:e}, {:e}], seed {}",
        check.samples, check.min_radius, check.max_radius, check.seed
    );
    Ok(HypothesisReport {
        h1: h1.finish("H1", c.c0, format!("<H_z, z> >= 2H - c0 with c0 = {}; {range}", c.c0)),
        h2: h2.finish("H2", c.c1, format!("gradient growth with p = {p}, q = {q}; {range}")),
        h3: h3.finish(
            "H3",
            c.c2,
            format!("Hessian growth for |z| > delta = {}; {range}", c.delta),
        ),
        h4: None,
    })
}

/// Sampling plan for the (H4) boundedness heuristic.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct H4Settings {
    /// Sublevel `a` of `∫H`.
    pub level: f64,
    pub samples: usize,
    pub seed: u64,
    /// Optional bound to compare against; without one, any finite supremum passes.
    pub bound: Option<f64>,
}

impl Default for H4Settings {
    fn default() -> Self {
        Self {
            level: 1.0,
            samples: 200,
            seed: 0,
            bound: None,
        }
    }
}

fn lp_norm(grid: &CircleGrid, values: &[Complex64], r: f64) -> f64 {
    grid.integrate(values.iter().map(|c| c.norm().powf(r))).powf(1.0 / r)
}

fn integral_h(spec: &NonlinearitySpec, grid: &CircleGrid, z: &PairField) -> Result<f64> {
    let g = grid.sample_pair(z);
    let mut acc = 0.0;
    for (m, (u, v)) in g.u.iter().zip(&g.v).enumerate() {
        acc += spec.value(grid.position(m), *u, *v)?;
    }
    Ok(acc / grid.num_points() as f64)
}

/// Sampled supremum of `‖H_u(z)‖_{L^{2n/(n+2s)}} + ‖H_v(z)‖_{L^{2n/(n+2(1-s))}}`
/// over random band-limited fields in `{∫H ≤ a}` (here `n = 1`).
///
/// Fields are drawn with log-uniform amplitude and pulled back into the
/// sublevel set by bisection on a scalar multiple. This probes (H4) but
/// cannot establish it.
pub fn check_h4(
    spec: &NonlinearitySpec,
    space: &EsSpace,
    grid: &CircleGrid,
    settings: &H4Settings,
) -> Result<HypothesisOutcome> {
    let s = space.s();
    let (ru, rv) = (2.0 / (1.0 + 2.0 * s), 2.0 / (1.0 + 2.0 * (1.0 - s)));
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut sup = 0.0f64;
    let mut used = 0;
    let mut skipped = 0;
    for _ in 0..settings.samples {
        let amp = rng.gen_range((1e-2f64).ln()..=(1e2f64).ln()).exp();
        let mut z = PairField::random(space.num_modes(), amp, &mut rng);
        if integral_h(spec, grid, &z)? > settings.level {
            let (mut lo, mut hi) = (0.0, 1.0);
            if integral_h(spec, grid, &z.scaled(0.0))? > settings.level {
                skipped += 1;
                continue;
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if integral_h(spec, grid, &z.scaled(mid))? <= settings.level {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            z = z.scaled(lo);
        }
        let g = grid.sample_pair(&z);
        let mut hu = Vec::with_capacity(g.num_points());
        let mut hv = Vec::with_capacity(g.num_points());
        for (m, (u, v)) in g.u.iter().zip(&g.v).enumerate() {
            let (a, b) = spec.gradient(grid.position(m), *u, *v)?;
            hu.push(a);
            hv.push(b);
        }
        sup = sup.max(lp_norm(grid, &hu, ru) + lp_norm(grid, &hv, rv));
        used += 1;
    }
    let constant = settings.bound.unwrap_or(f64::INFINITY);
    let passed = sup.is_finite() && sup <= constant;
    Ok(HypothesisOutcome {
        name: "H4".into(),
        passed,
        heuristic: true,
        constant,
        required: sup,
        worst_margin: constant - sup,
        samples_used: used,
        witness: None,
        detail: format!(
            "sampled sup of T(z) over band-limited fields with int H <= {} ({} modes, s = {s}); \
             {skipped} draws skipped because the sublevel set misses the ray",
            settings.level,
            space.num_modes()
        ),
    })
}
