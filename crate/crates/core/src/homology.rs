//! ℤ₂ Morse-Bott chain complexes graded by `ν = i_rel + ind`, their mod-2
//! homology with per-entry provenance, and an experimental shooting counter
//! for connecting orbits.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::critical::{
    analytic_index_oracle, negative_eigenvectors, newton_solve, relative_index, CriticalManifold, CriticalPoint,
    Extremum, NewtonSettings,
};
use crate::error::{Error, Result};
use crate::flow::{integrate_flow, FlowSettings, FlowTrajectory};
use crate::functional::{FunctionalContext, KERNEL_TOL};
use crate::perturbation::PerturbationMap;
use crate::spectral::{ExtendedPoint, LSpectrum};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    StructuralZero,
    Analytic,
    Numerical,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub label: String,
    pub nu: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<f64>,
}

/// Coefficient of `to` in `∂(from)`; `bit` is `None` exactly when unknown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub from: String,
    pub to: String,
    pub bit: Option<bool>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainComplexZ2 {
    #[serde(default)]
    pub window: Option<(i64, i64)>,
    pub generators: Vec<Generator>,
    pub boundary: Vec<BoundaryEntry>,
}

impl ChainComplexZ2 {
    /// Complex with every adjacent-degree entry unknown, except that entries
    /// from lower to higher action are structural zeros.
    pub fn new(generators: Vec<Generator>, window: Option<(i64, i64)>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for g in &generators {
            if !seen.insert(g.label.clone()) {
                return Err(Error::Config(format!("duplicate generator label {}", g.label)));
            }
        }
        let mut boundary = vec![];
        for a in &generators {
            for b in generators.iter().filter(|b| b.nu == a.nu - 1) {
                let uphill = matches!((a.action, b.action), (Some(x), Some(y)) if x < y);
                boundary.push(BoundaryEntry {
                    from: a.label.clone(),
                    to: b.label.clone(),
                    bit: uphill.then_some(false),
                    provenance: if uphill {
                        Provenance::StructuralZero
                    } else {
                        Provenance::Unknown
                    },
                });
            }
        }
        Ok(Self {
            window,
            generators,
            boundary,
        })
    }

    pub fn empty() -> Self {
        Self {
            window: None,
            generators: vec![],
            boundary: vec![],
        }
    }

    fn generator(&self, label: &str) -> Option<&Generator> {
        self.generators.iter().find(|g| g.label == label)
    }

    pub fn set_entry(&mut self, from: &str, to: &str, bit: bool, provenance: Provenance) -> Result<()> {
        let (a, b) = match (self.generator(from), self.generator(to)) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Config(format!("unknown generator in entry {from} → {to}"))),
        };
        if a.nu != b.nu + 1 {
            return Err(Error::Config(format!(
                "∂ lowers degree by one; {from} has ν = {} and {to} has ν = {}",
                a.nu, b.nu
            )));
        }
        if provenance == Provenance::Unknown {
            return Err(Error::Config("a specified entry cannot have unknown provenance".into()));
        }
        let entry = BoundaryEntry {
            from: from.into(),
            to: to.into(),
            bit: Some(bit),
            provenance,
        };
        match self.boundary.iter_mut().find(|e| e.from == from && e.to == to) {
            Some(e) => *e = entry,
            None => self.boundary.push(entry),
        }
        Ok(())
    }

    pub fn entry(&self, from: &str, to: &str) -> Option<bool> {
        self.boundary
            .iter()
            .find(|e| e.from == from && e.to == to)
            .and_then(|e| e.bit)
    }

    /// Generator labels in degree `k`, in storage order.
    pub fn generators_in(&self, k: i64) -> Vec<&str> {
        self.generators
            .iter()
            .filter(|g| g.nu == k)
            .map(|g| g.label.as_str())
            .collect()
    }

    pub fn degrees(&self) -> BTreeSet<i64> {
        self.generators.iter().map(|g| g.nu).collect()
    }

    pub fn rank(&self, k: i64) -> usize {
        self.generators_in(k).len()
    }

    /// `∂_k : C_k → C_{k-1}` as rows indexed by `C_{k-1}`, columns by `C_k`.
    pub fn matrix(&self, k: i64) -> Vec<Vec<Option<bool>>> {
        let cols = self.generators_in(k);
        let rows = self.generators_in(k - 1);
        let lookup: HashMap<(&str, &str), Option<bool>> = self
            .boundary
            .iter()
            .map(|e| ((e.from.as_str(), e.to.as_str()), e.bit))
            .collect();
        rows.iter()
            .map(|r| cols.iter().map(|c| lookup.get(&(*c, *r)).copied().flatten()).collect())
            .collect()
    }

    /// Same complex with generators listed in the order given by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut out = self.clone();
        out.generators = perm.iter().map(|&i| self.generators[i].clone()).collect();
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("complex serializes");
        v["schema_version"] = SCHEMA_VERSION.into();
        v
    }
}

/// Grading data of one critical component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentGrading {
    pub k: i64,
    pub multiplicity: usize,
    pub nu_plus: i64,
    pub nu_minus: i64,
    #[serde(default)]
    pub action: Option<f64>,
}

pub fn generator_label(k: i64, which: Extremum) -> String {
    match which {
        Extremum::Plus => format!("p{k}+"),
        Extremum::Minus => format!("p{k}-"),
    }
}

/// Generators `p_k^±` with degree in the window. When `m_k = 1` the entry
/// `p_k⁺ → p_k⁻` is zero (two flow lines on the circle `σ_k`); for `m_k > 1`
/// the degree gap `2m_k - 1 ≥ 3` keeps it out of `∂` altogether.
pub fn assemble_complex(components: &[ComponentGrading], window: (i64, i64)) -> Result<ChainComplexZ2> {
    let (lo, hi) = window;
    let mut gens = vec![];
    for c in components {
        for (which, nu) in [(Extremum::Plus, c.nu_plus), (Extremum::Minus, c.nu_minus)] {
            if (lo..=hi).contains(&nu) {
                gens.push(Generator {
                    label: generator_label(c.k, which),
                    nu,
                    component: Some(c.k),
                    action: c.action,
                });
            }
        }
    }
    gens.sort_by_key(|g| g.nu);
    let mut cx = ChainComplexZ2::new(gens, Some(window))?;
    for c in components {
        let (plus, minus) = (
            generator_label(c.k, Extremum::Plus),
            generator_label(c.k, Extremum::Minus),
        );
        if c.nu_plus - c.nu_minus == 1 && cx.generator(&plus).is_some() && cx.generator(&minus).is_some() {
            cx.set_entry(&plus, &minus, false, Provenance::Analytic)?;
        }
    }
    Ok(cx)
}

/// Closed-form grading of the quadratic Hamiltonian's critical components.
pub fn h0_gradings(lspec: &LSpectrum) -> Vec<ComponentGrading> {
    lspec
        .levels()
        .into_iter()
        .map(|(k, mu, m)| {
            let (_, nu_plus) = analytic_index_oracle(lspec, k, Extremum::Plus).expect("k is in the window");
            let (_, nu_minus) = analytic_index_oracle(lspec, k, Extremum::Minus).expect("k is in the window");
            ComponentGrading {
                k,
                multiplicity: m,
                nu_plus,
                nu_minus,
                action: Some(mu),
            }
        })
        .collect()
}

pub fn assemble_h0_complex(lspec: &LSpectrum, window: (i64, i64)) -> Result<ChainComplexZ2> {
    assemble_complex(&h0_gradings(lspec), window)
}

/// Gradings from critical points refined by Newton's method (starting at
/// the maxima `p_k⁺` of the given components) and truncated relative
/// indices over `schedule`. Fails when an index does not stabilize.
pub fn numeric_gradings(
    ctx: &FunctionalContext,
    components: &[CriticalManifold],
    schedule: &[usize],
    newton: &NewtonSettings,
) -> Result<Vec<ComponentGrading>> {
    components
        .par_iter()
        .map(|m| {
            let cp = newton_solve(ctx, &m.p_plus, newton)?;
            let report = relative_index(ctx, &cp, schedule)?;
            if !report.stabilized {
                return Err(Error::Evaluation(format!(
                    "relative index at k = {} did not stabilize over {schedule:?}",
                    m.k
                )));
            }
            Ok(ComponentGrading {
                k: m.k,
                multiplicity: m.multiplicity,
                nu_plus: report.nu_plus,
                nu_minus: report.nu_minus,
                action: Some(ctx.action(&cp.w)?),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Confidence {
    Exact,
    ConditionalOnUnknownEntries,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomologyDegree {
    pub degree: i64,
    /// Determined dimension, when every admissible completion agrees.
    pub dim: Option<usize>,
    pub min_dim: usize,
    pub max_dim: usize,
    pub confidence: Confidence,
    pub chain_rank: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HomologyResult {
    pub degrees: Vec<HomologyDegree>,
}

impl HomologyResult {
    pub fn at(&self, k: i64) -> Option<&HomologyDegree> {
        self.degrees.iter().find(|d| d.degree == k)
    }

    /// `Σ(-1)^k dim H_k` when every degree is determined.
    pub fn euler_characteristic(&self) -> Option<i64> {
        self.degrees
            .iter()
            .map(|d| {
                d.dim.map(|v| {
                    if d.degree.rem_euclid(2) == 0 {
                        v as i64
                    } else {
                        -(v as i64)
                    }
                })
            })
            .sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "homology": self.degrees,
        })
    }
}

/// Rank over GF(2) by row reduction.
pub fn rank_gf2(rows: &[Vec<bool>]) -> usize {
    let mut m: Vec<Vec<bool>> = rows.to_vec();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..ncols {
        let Some(pivot) = (rank..m.len()).find(|&r| m[r][col]) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in 0..m.len() {
            if r != rank && m[r][col] {
                let pivot_row = m[rank].clone();
                for (x, p) in m[r].iter_mut().zip(pivot_row) {
                    *x ^= p;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// `outer ∘ inner = 0` for `outer = ∂_k` and `inner = ∂_{k+1}`.
fn compose_is_zero(outer: &[Vec<bool>], inner: &[Vec<bool>]) -> bool {
    let ncols = inner.first().map_or(0, |r| r.len());
    outer.iter().all(|row| {
        (0..ncols).all(|c| {
            !row.iter()
                .zip(inner)
                .fold(false, |acc, (&x, irow)| acc ^ (x && irow[c]))
        })
    })
}

const MAX_ENUMERATED_UNKNOWNS: usize = 16;

/// Mod-2 homology degree by degree over the window (or the generator range).
pub fn homology(cx: &ChainComplexZ2) -> Result<HomologyResult> {
    check_d_squared(cx)?;
    let degrees = cx.degrees();
    let (lo, hi) = match (cx.window, degrees.first(), degrees.last()) {
        (Some(w), _, _) => w,
        (None, Some(&a), Some(&b)) => (a, b),
        _ => return Ok(HomologyResult { degrees: vec![] }),
    };
    let mut out = vec![];
    for k in lo..=hi {
        let n = cx.rank(k);
        let lower = cx.matrix(k);
        let upper = cx.matrix(k + 1);
        let slots: Vec<(bool, usize, usize)> = lower
            .iter()
            .enumerate()
            .flat_map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, b)| b.is_none())
                    .map(move |(c, _)| (false, r, c))
            })
            .chain(upper.iter().enumerate().flat_map(|(r, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, b)| b.is_none())
                    .map(move |(c, _)| (true, r, c))
            }))
            .collect();
        let fill = |m: &[Vec<Option<bool>>]| -> Vec<Vec<bool>> {
            m.iter()
                .map(|r| r.iter().map(|b| b.unwrap_or(false)).collect())
                .collect()
        };
        let dim_of = |l: &[Vec<bool>], u: &[Vec<bool>]| n - rank_gf2(l) - rank_gf2(u);
        let (min_dim, max_dim, confidence) = if slots.is_empty() {
            let d = dim_of(&fill(&lower), &fill(&upper));
            (d, d, Confidence::Exact)
        } else if slots.len() <= MAX_ENUMERATED_UNKNOWNS {
            let (mut mn, mut mx) = (usize::MAX, 0);
            for mask in 0u32..(1 << slots.len()) {
                let mut l = fill(&lower);
                let mut u = fill(&upper);
                for (i, &(up, r, c)) in slots.iter().enumerate() {
                    let bit = mask >> i & 1 == 1;
                    if up {
                        u[r][c] = bit;
                    } else {
                        l[r][c] = bit;
                    }
                }
                if !compose_is_zero(&l, &u) {
                    continue;
                }
                let d = dim_of(&l, &u);
                mn = mn.min(d);
                mx = mx.max(d);
            }
            (mn, mx, Confidence::ConditionalOnUnknownEntries)
        } else {
            let below = cx.rank(k - 1).min(n);
            let above = cx.rank(k + 1).min(n);
            (
                n.saturating_sub(below + above),
                n,
                Confidence::ConditionalOnUnknownEntries,
            )
        };
        out.push(HomologyDegree {
            degree: k,
            dim: (min_dim == max_dim).then_some(min_dim),
            min_dim,
            max_dim,
            confidence,
            chain_rank: n,
        });
    }
    Ok(HomologyResult { degrees: out })
}

fn check_d_squared(cx: &ChainComplexZ2) -> Result<()> {
    let mut by_degree: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
    for g in &cx.generators {
        by_degree.entry(g.nu).or_default().push(&g.label);
    }
    let lookup: HashMap<(&str, &str), Option<bool>> = cx
        .boundary
        .iter()
        .map(|e| ((e.from.as_str(), e.to.as_str()), e.bit))
        .collect();
    let bit = |a: &str, b: &str| lookup.get(&(a, b)).copied().flatten();
    for (&k, top) in &by_degree {
        let (Some(mid), Some(bottom)) = (by_degree.get(&(k - 1)), by_degree.get(&(k - 2))) else {
            continue;
        };
        for a in top {
            for c in bottom {
                let mut parity = false;
                let mut specified = true;
                for b in mid {
                    match (bit(a, b), bit(b, c)) {
                        (Some(x), Some(y)) => parity ^= x && y,
                        (Some(false), None) | (None, Some(false)) => {}
                        _ => specified = false,
                    }
                }
                if specified && parity {
                    return Err(Error::Inconsistent(format!("∂∂ ≠ 0 from {a} to {c}")));
                }
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShootMethod {
    /// Gradient lines of the height function on a critical sphere.
    HeightFunction,
    /// Trajectories of the (perturbed) negative gradient flow of the action.
    ActionFlow,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootSettings {
    /// Launches for unstable manifolds of dimension above one.
    pub bundle: usize,
    pub epsilon: f64,
    /// Radius of the arrival ball around the target.
    pub delta: f64,
    /// Crossings of the mid level closer than this are the same trajectory.
    pub cluster_tol: f64,
    pub horizon: f64,
    pub seed: u64,
    pub flow: FlowSettings,
}

impl Default for ShootSettings {
    fn default() -> Self {
        Self {
            bundle: 32,
            epsilon: 1e-4,
            delta: 1e-3,
            cluster_tol: 1e-3,
            horizon: 50.0,
            seed: 0,
            flow: FlowSettings {
                rtol: 1e-8,
                atol: 1e-10,
                ..FlowSettings::default()
            },
        }
    }
}

/// Outcome of a shooting experiment. Always heuristic: it never enters a
/// complex without an explicit caller decision.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShootReport {
    pub method: ShootMethod,
    pub launched: usize,
    pub converged: usize,
    pub distinct: usize,
    pub count_mod2: u8,
    pub heuristic: bool,
    /// Some trajectories aborted (stiffness or step budget).
    pub partial: bool,
    pub note: String,
}

impl ShootReport {
    fn trivial(note: &str) -> Self {
        Self {
            method: ShootMethod::None,
            launched: 0,
            converged: 0,
            distinct: 0,
            count_mod2: 0,
            heuristic: true,
            partial: false,
            note: note.into(),
        }
    }
}

fn cluster(points: &[Vec<f64>], tol: f64) -> usize {
    let mut reps: Vec<&Vec<f64>> = vec![];
    for p in points {
        let close = reps
            .iter()
            .any(|r| r.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() < tol);
        if !close {
            reps.push(p);
        }
    }
    reps.len()
}

/// Unit launch directions in the span of orthonormal columns: `±v` for a
/// one-dimensional span, random combinations otherwise.
fn launch_directions(basis: &[DVector<f64>], bundle: usize, seed: u64) -> Vec<DVector<f64>> {
    match basis.len() {
        0 => vec![],
        1 => vec![basis[0].clone(), -basis[0].clone()],
        d => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..bundle)
                .map(|_| {
                    let mut v = basis[0].scale(0.0);
                    for b in basis.iter().take(d) {
                        v += b.scale(rng.gen_range(-1.0..1.0));
                    }
                    let n = v.norm();
                    v / n
                })
                .collect()
        }
    }
}

/// Count trajectories from `from` arriving near `to` (or near its component
/// when `component` is given). Same-component pairs on `component` are
/// handled by the height function on the sphere; other pairs by the action
/// flow launched along the numerical unstable directions.
pub fn shoot_connecting_orbits(
    ctx: &FunctionalContext,
    pert: Option<&PerturbationMap>,
    from: &CriticalPoint,
    to: &CriticalPoint,
    component: Option<&CriticalManifold>,
    settings: &ShootSettings,
) -> Result<ShootReport> {
    let space = ctx.space();
    let diff = ExtendedPoint::new(from.w.z.add_scaled(-1.0, &to.w.z), from.w.lambda - to.w.lambda);
    if space.e_norm(&diff) < 1e-12 {
        return Ok(ShootReport::trivial("source equals target"));
    }
    let (a_from, a_to) = (ctx.action(&from.w)?, ctx.action(&to.w)?);
    if a_to > a_from + 1e-12 {
        return Ok(ShootReport::trivial("target has higher action than source"));
    }
    if let Some(m) = component {
        let on = |w: &ExtendedPoint| m.distance_to(space, w) < 1e-8;
        if on(&from.w) && on(&to.w) {
            return Ok(shoot_on_sphere(m, from, to, settings));
        }
    }
    shoot_by_flow(ctx, pert, from, to, component, (a_from, a_to), settings)
}

fn sphere_coeffs(m: &CriticalManifold, w: &ExtendedPoint) -> Vec<Complex64> {
    m.basis
        .iter()
        .map(|b| {
            b.u.iter()
                .zip(&w.z.u)
                .chain(b.v.iter().zip(&w.z.v))
                .map(|(e, a)| a * e.conj())
                .sum()
        })
        .collect()
}

fn shoot_on_sphere(
    m: &CriticalManifold,
    from: &CriticalPoint,
    to: &CriticalPoint,
    settings: &ShootSettings,
) -> ShootReport {
    let realify = |c: &[Complex64]| DVector::from_iterator(2 * c.len(), c.iter().flat_map(|x| [x.re, x.im]));
    let r = m.radius;
    let top = realify(&sphere_coeffs(m, &from.w));
    let e = &top / top.norm();
    let target = realify(&sphere_coeffs(m, &to.w));
    if (&target + e.scale(r)).norm() > settings.delta * r {
        return ShootReport {
            method: ShootMethod::HeightFunction,
            note: "target is not the minimum of the height function through the source".into(),
            ..ShootReport::trivial("")
        };
    }
    let dim = e.len();
    let mut tangent: Vec<DVector<f64>> = vec![];
    for i in 0..dim {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v -= e.scale(e.dot(&v));
        for t in &tangent {
            v -= t.scale(t.dot(&v));
        }
        if v.norm() > 1e-8 {
            tangent.push(v.normalize());
        }
    }
    let dirs = launch_directions(&tangent, settings.bundle, settings.seed);
    let grad = |c: &DVector<f64>| e.clone() - c.scale(e.dot(c) / (r * r));
    let dt = 0.01;
    let steps = (settings.horizon / dt).ceil() as usize;
    let results: Vec<Option<Vec<f64>>> = dirs
        .par_iter()
        .map(|d| {
            let mut c = (e.scale(r) + d.scale(settings.epsilon * r)).normalize().scale(r);
            let mut crossing = None;
            for _ in 0..steps {
                let h0 = e.dot(&c);
                let k1 = -grad(&c);
                let k2 = -grad(&(&c + k1.scale(dt / 2.0)));
                let k3 = -grad(&(&c + k2.scale(dt / 2.0)));
                let k4 = -grad(&(&c + k3.scale(dt)));
                c += (k1 + k2.scale(2.0) + k3.scale(2.0) + k4).scale(dt / 6.0);
                c = c.normalize().scale(r);
                if crossing.is_none() && h0 > 0.0 && e.dot(&c) <= 0.0 {
                    crossing = Some(c.iter().copied().collect::<Vec<f64>>());
                }
                if (&c + e.scale(r)).norm() < settings.delta * r {
                    return crossing;
                }
            }
            None
        })
        .collect();
    let arrived: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let distinct = cluster(&arrived, settings.cluster_tol * r.max(1.0));
    ShootReport {
        method: ShootMethod::HeightFunction,
        launched: dirs.len(),
        converged: arrived.len(),
        distinct,
        count_mod2: (distinct % 2) as u8,
        heuristic: true,
        partial: false,
        note: format!("unstable manifold of the maximum has dimension {}", tangent.len()),
    }
}

fn shoot_by_flow(
    ctx: &FunctionalContext,
    pert: Option<&PerturbationMap>,
    from: &CriticalPoint,
    to: &CriticalPoint,
    component: Option<&CriticalManifold>,
    (a_from, a_to): (f64, f64),
    settings: &ShootSettings,
) -> Result<ShootReport> {
    let space = ctx.space();
    let (_, vecs) = negative_eigenvectors(ctx, &from.w, KERNEL_TOL)?;
    let basis: Vec<DVector<f64>> = vecs.column_iter().map(|c| c.into_owned()).collect();
    let dirs = launch_directions(&basis, settings.bundle, settings.seed);
    let x0 = space.coords(&from.w);
    let distance = |w: &ExtendedPoint| match component {
        Some(m) => m.distance_to(space, w),
        None => space.e_norm(&ExtendedPoint::new(
            w.z.add_scaled(-1.0, &to.w.z),
            w.lambda - to.w.lambda,
        )),
    };
    let mid = 0.5 * (a_from + a_to);
    let runs: Vec<(Option<Vec<f64>>, bool)> = dirs
        .par_iter()
        .map(|d| {
            let start = space.point(&(&x0 + d.scale(settings.epsilon)));
            let traj: FlowTrajectory = match integrate_flow(ctx, pert, &start, settings.horizon, &settings.flow) {
                Ok(t) => t,
                Err(Error::Stiffness { partial, .. }) => {
                    return (arrival(&partial, mid, &distance, settings, space), true)
                }
                Err(_) => return (None, true),
            };
            (arrival(&traj, mid, &distance, settings, space), false)
        })
        .collect();
    let partial = runs.iter().any(|r| r.1);
    let arrived: Vec<Vec<f64>> = runs.into_iter().filter_map(|r| r.0).collect();
    let distinct = cluster(&arrived, settings.cluster_tol);
    Ok(ShootReport {
        method: ShootMethod::ActionFlow,
        launched: dirs.len(),
        converged: arrived.len(),
        distinct,
        count_mod2: (distinct % 2) as u8,
        heuristic: true,
        partial,
        note: format!("{} unstable directions at the source", basis.len()),
    })
}

fn arrival(
    traj: &FlowTrajectory,
    mid: f64,
    distance: &dyn Fn(&ExtendedPoint) -> f64,
    settings: &ShootSettings,
    space: &crate::spectral::EsSpace,
) -> Option<Vec<f64>> {
    if traj.is_empty() || distance(traj.final_state()) >= settings.delta {
        return None;
    }
    let i = traj.actions.iter().position(|&a| a <= mid).unwrap_or(traj.len() - 1);
    Some(space.coords(&traj.states[i]).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::h0_critical_manifolds;
    use crate::nonlinearity::NonlinearitySpec;
    use crate::spectral::Spectrum;
    use proptest::prelude::*;
    use rand::Rng;

    fn circle_degrees() -> Vec<i64> {
        vec![-13, -12, -9, -8, -5, -4, -1, 1, 4, 5, 8, 9, 12, 13]
    }

    fn alternating(n: usize) -> Spectrum {
        Spectrum::synthetic(
            (1..=n)
                .map(|j| (if j % 2 == 1 { j as f64 } else { -(j as f64) }, 1))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn circle_grading() {
        let lspec = Spectrum::circle(8).unwrap().l_spectrum();
        let cx = assemble_h0_complex(&lspec, (-13, 13)).unwrap();
        let mut degrees: Vec<i64> = cx.generators.iter().map(|g| g.nu).collect();
        degrees.sort();
        assert_eq!(degrees, circle_degrees());
        let h = homology(&cx).unwrap();
        let d = h.at(-1).unwrap();
        assert_eq!(d.dim, Some(1));
        assert_eq!(d.confidence, Confidence::Exact);
        assert_eq!(h.at(0).unwrap().dim, Some(0));
    }

    #[test]
    fn unit_multiplicity_grading() {
        let lspec = alternating(16).l_spectrum();
        assert!(lspec.levels().iter().all(|l| l.2 == 1));
        let cx = assemble_h0_complex(&lspec, (-5, 5)).unwrap();
        let mut degrees: Vec<i64> = cx.generators.iter().map(|g| g.nu).collect();
        degrees.sort();
        assert_eq!(degrees, vec![-5, -4, -3, -2, -1, 1, 2, 3, 4, 5]);
        assert_eq!(cx.entry("p1+", "p1-"), Some(false));
        let h = homology(&cx).unwrap();
        assert_eq!(h.at(-1).unwrap().dim, Some(1));
        assert_eq!(h.at(-1).unwrap().confidence, Confidence::Exact);
    }

    #[test]
    fn grading_gaps() {
        for lspec in [Spectrum::circle(8).unwrap().l_spectrum(), alternating(12).l_spectrum()] {
            let g: HashMap<i64, ComponentGrading> = h0_gradings(&lspec).into_iter().map(|c| (c.k, c)).collect();
            for k in -4i64..=5 {
                if k == 0 || k == 1 {
                    continue;
                }
                assert_eq!(g[&k].nu_minus - g[&(k - 1)].nu_plus, 1, "k = {k}");
            }
            assert_eq!(g[&1].nu_minus - g[&-1].nu_plus, 2);
        }
    }

    #[test]
    fn empty_window() {
        let lspec = Spectrum::circle(4).unwrap().l_spectrum();
        let cx = assemble_h0_complex(&lspec, (2, 3)).unwrap();
        assert!(cx.generators.is_empty());
        let h = homology(&cx).unwrap();
        assert!(h.degrees.iter().all(|d| d.dim == Some(0)));
        assert!(homology(&ChainComplexZ2::empty()).unwrap().degrees.is_empty());
    }

    fn chain(gens: &[(&str, i64)]) -> ChainComplexZ2 {
        ChainComplexZ2::new(
            gens.iter()
                .map(|(l, n)| Generator {
                    label: l.to_string(),
                    nu: *n,
                    component: None,
                    action: None,
                })
                .collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_boundary_gives_chain_groups() {
        let mut cx = chain(&[("a", 0), ("b", 1), ("c", 1), ("d", 2)]);
        for e in cx.boundary.clone() {
            cx.set_entry(&e.from, &e.to, false, Provenance::Numerical).unwrap();
        }
        let h = homology(&cx).unwrap();
        assert_eq!(h.at(0).unwrap().dim, Some(1));
        assert_eq!(h.at(1).unwrap().dim, Some(2));
        assert_eq!(h.at(2).unwrap().dim, Some(1));
        assert!(h.degrees.iter().all(|d| d.confidence == Confidence::Exact));
    }

    #[test]
    fn d_squared_violation() {
        let mut cx = chain(&[("a", 2), ("b", 1), ("c", 1), ("d", 0)]);
        cx.set_entry("a", "b", true, Provenance::Numerical).unwrap();
        cx.set_entry("a", "c", false, Provenance::Numerical).unwrap();
        cx.set_entry("b", "d", true, Provenance::Numerical).unwrap();
        cx.set_entry("c", "d", true, Provenance::Numerical).unwrap();
        match homology(&cx) {
            Err(Error::Inconsistent(msg)) => assert!(msg.contains('a') && msg.contains('d')),
            other => panic!("expected inconsistency, got {other:?}"),
        }
        cx.set_entry("a", "c", true, Provenance::Numerical).unwrap();
        let h = homology(&cx).unwrap();
        assert_eq!(h.at(1).unwrap().dim, Some(0));
    }

    #[test]
    fn unknown_entries_give_ranges() {
        let cx = chain(&[("a", 1), ("b", 0)]);
        let h = homology(&cx).unwrap();
        let d0 = h.at(0).unwrap();
        assert_eq!((d0.min_dim, d0.max_dim, d0.dim), (0, 1, None));
        assert_eq!(d0.confidence, Confidence::ConditionalOnUnknownEntries);
    }

    #[test]
    fn structural_zero_from_action_order() {
        let gens = vec![
            Generator {
                label: "x".into(),
                nu: 1,
                component: None,
                action: Some(1.0),
            },
            Generator {
                label: "y".into(),
                nu: 0,
                component: None,
                action: Some(2.0),
            },
        ];
        let cx = ChainComplexZ2::new(gens, None).unwrap();
        assert_eq!(cx.boundary[0].provenance, Provenance::StructuralZero);
        assert_eq!(homology(&cx).unwrap().at(0).unwrap().confidence, Confidence::Exact);
    }

    #[test]
    fn set_entry_rejects_wrong_degree() {
        let mut cx = chain(&[("a", 2), ("b", 0)]);
        assert!(cx.set_entry("a", "b", true, Provenance::Numerical).is_err());
    }

    #[test]
    fn json_shape() {
        let lspec = Spectrum::circle(2).unwrap().l_spectrum();
        let cx = assemble_h0_complex(&lspec, (-5, 5)).unwrap();
        let v = cx.to_json();
        assert_eq!(v["schema_version"], 1);
        assert!(v["generators"][0]["label"].is_string());
        assert!(v["boundary"][0]["bit"].is_null());
        assert_eq!(v["boundary"][0]["provenance"], "unknown");
        let back: ChainComplexZ2 = serde_json::from_value(v).unwrap();
        assert_eq!(back, cx);
        let h = homology(&cx).unwrap().to_json();
        let rows = h["homology"].as_array().unwrap();
        let minus_one = rows.iter().find(|r| r["degree"] == -1).unwrap();
        assert_eq!(minus_one["confidence"], "exact");
        assert_eq!(minus_one["dim"], 1);
    }

    fn random_complex(seed: u64) -> ChainComplexZ2 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes: Vec<usize> = (0..4).map(|_| rng.gen_range(0..4)).collect();
        let gens: Vec<(String, i64)> = sizes
            .iter()
            .enumerate()
            .flat_map(|(d, &n)| (0..n).map(move |i| (format!("g{d}_{i}"), d as i64)))
            .collect();
        let mut cx = ChainComplexZ2::new(
            gens.iter()
                .map(|(l, n)| Generator {
                    label: l.clone(),
                    nu: *n,
                    component: None,
                    action: None,
                })
                .collect(),
            None,
        )
        .unwrap();
        // a genuine complex: ∂ = d∘(random basis change) with d² = 0 built degree by degree
        for k in 1..4i64 {
            let cols = cx.generators_in(k).iter().map(|s| s.to_string()).collect::<Vec<_>>();
            let rows = cx
                .generators_in(k - 1)
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>();
            for c in &cols {
                for r in &rows {
                    cx.set_entry(c, r, false, Provenance::Numerical).unwrap();
                }
            }
            // pair off generators: c_i → r_i for a random prefix, provided r_i is not itself a boundary target
            let take = rng.gen_range(0..=cols.len().min(rows.len()));
            for i in 0..take {
                let hit_from_above = cx
                    .generators_in(k + 1)
                    .iter()
                    .any(|a| cx.entry(a, &cols[i]) == Some(true));
                let r_has_image = cx
                    .generators_in(k - 2)
                    .iter()
                    .any(|b| cx.entry(&rows[i], b) == Some(true));
                if !hit_from_above && !r_has_image {
                    cx.set_entry(&cols[i], &rows[i], true, Provenance::Numerical).unwrap();
                }
            }
        }
        cx
    }

    proptest! {
        #[test]
        fn euler_characteristic_matches_chain_groups(seed in 0u64..500) {
            let cx = random_complex(seed);
            if let Ok(h) = homology(&cx) {
                let chi_chain: i64 = (0..4).map(|k| if k % 2 == 0 { cx.rank(k) as i64 } else { -(cx.rank(k) as i64) }).sum();
                prop_assert_eq!(h.euler_characteristic(), Some(chi_chain));
            }
        }

        #[test]
        fn homology_is_basis_independent(seed in 0u64..500, shuffle in 0u64..1000) {
            let cx = random_complex(seed);
            let mut perm: Vec<usize> = (0..cx.generators.len()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(shuffle);
            for i in (1..perm.len()).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let a = homology(&cx);
            let b = homology(&cx.permuted(&perm));
            match (a, b) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a, b),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "permutation changed consistency"),
            }
        }
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_gf2(&[vec![true, true], vec![true, true]]), 1);
        assert_eq!(rank_gf2(&[vec![true, false], vec![false, true]]), 2);
        assert_eq!(rank_gf2(&[]), 0);
        assert_eq!(
            rank_gf2(&[
                vec![true, true, false],
                vec![false, true, true],
                vec![true, false, true]
            ]),
            2
        );
    }

    fn h0_context(spec: Spectrum) -> FunctionalContext {
        FunctionalContext::from_parts(spec, 0.5, NonlinearitySpec::quadratic()).unwrap()
    }

    #[test]
    fn two_flow_lines_on_circle_component() {
        let ctx = h0_context(alternating(6));
        let ms = h0_critical_manifolds(&ctx).unwrap();
        let m = ms.iter().find(|m| m.k == 1).unwrap();
        assert_eq!(m.multiplicity, 1);
        let from = CriticalPoint::at(&ctx, m.p_plus.clone()).unwrap();
        let to = CriticalPoint::at(&ctx, m.p_minus.clone()).unwrap();
        let report = shoot_connecting_orbits(&ctx, None, &from, &to, Some(m), &ShootSettings::default()).unwrap();
        assert_eq!(report.method, ShootMethod::HeightFunction);
        assert_eq!(report.launched, 2);
        assert_eq!(report.distinct, 2);
        assert_eq!(report.count_mod2, 0);
        assert!(report.heuristic);
    }

    #[test]
    fn trivial_shots() {
        let ctx = h0_context(Spectrum::circle(2).unwrap());
        let ms = h0_critical_manifolds(&ctx).unwrap();
        let m1 = ms.iter().find(|m| m.k == 1).unwrap();
        let m2 = ms.iter().find(|m| m.k == 2).unwrap();
        let p = CriticalPoint::at(&ctx, m1.p_plus.clone()).unwrap();
        let q = CriticalPoint::at(&ctx, m2.p_minus.clone()).unwrap();
        let same = shoot_connecting_orbits(&ctx, None, &p, &p, Some(m1), &ShootSettings::default()).unwrap();
        assert_eq!((same.launched, same.distinct), (0, 0));
        let uphill = shoot_connecting_orbits(&ctx, None, &p, &q, Some(m2), &ShootSettings::default()).unwrap();
        assert_eq!((uphill.launched, uphill.distinct), (0, 0));
    }

    #[test]
    fn numeric_gradings_of_scaled_h0() {
        let ctx = h0_context(Spectrum::circle(4).unwrap());
        let ms = h0_critical_manifolds(&ctx).unwrap();
        let near: Vec<CriticalManifold> = ms.into_iter().filter(|m| m.k.abs() <= 2).collect();
        let scaled = ctx
            .with_nonlinearity(NonlinearitySpec::quadratic().with_scale(1.001))
            .unwrap();
        let a = numeric_gradings(&ctx, &near, &[6, 8], &NewtonSettings::default()).unwrap();
        let b = numeric_gradings(&scaled, &near, &[6, 8], &NewtonSettings::default()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!((x.k, x.nu_plus, x.nu_minus), (y.k, y.nu_plus, y.nu_minus));
            assert!((y.action.unwrap() * 1.001 - x.action.unwrap()).abs() < 1e-9);
        }
        let k1 = a.iter().find(|g| g.k == 1).unwrap();
        assert_eq!((k1.nu_minus, k1.nu_plus), (1, 4));
    }

    #[test]
    fn action_flow_shooting_runs() {
        let ctx = h0_context(Spectrum::circle(1).unwrap());
        let ms = h0_critical_manifolds(&ctx).unwrap();
        let top = ms.iter().find(|m| m.k == 1).unwrap();
        let bottom = ms.iter().find(|m| m.k == -1).unwrap();
        let from = CriticalPoint::at(&ctx, top.p_minus.clone()).unwrap();
        let to = CriticalPoint::at(&ctx, bottom.p_plus.clone()).unwrap();
        let settings = ShootSettings {
            bundle: 4,
            horizon: 5.0,
            ..ShootSettings::default()
        };
        let report = shoot_connecting_orbits(&ctx, None, &from, &to, Some(bottom), &settings).unwrap();
        assert_eq!(report.method, ShootMethod::ActionFlow);
        assert!(report.launched > 0);
        assert!(report.converged <= report.launched);
    }
}
