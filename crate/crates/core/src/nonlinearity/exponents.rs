use serde::Serialize;

use crate::error::{Error, Result};

/// Feasible range of the fractional exponent `s` for growth exponents
/// `(p, q)` in dimension `n`, with the chosen value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentWitness {
    pub n: usize,
    pub p: f64,
    pub q: f64,
    /// Open interval `(s_lo, s_hi) ⊂ (0, 1)`.
    pub interval: (f64, f64),
    /// Midpoint of the interval.
    pub s: f64,
}

impl ExponentWitness {
    /// Both strict embedding inequalities at `s`:
    /// `p < (n+2s)/(n-2s)` and `q < (n+2-2s)/(n+2s-2)`, where a non-positive
    /// denominator means the critical exponent is infinite.
    pub fn admits(n: usize, p: f64, q: f64, s: f64) -> bool {
        let n = n as f64;
        let below = |exponent: f64, num: f64, den: f64| den <= 0.0 || exponent * den < num;
        s > 0.0 && s < 1.0 && below(p, n + 2.0 * s, n - 2.0 * s) && below(q, n + 2.0 - 2.0 * s, n + 2.0 * s - 2.0)
    }
}

/// Solve the exponent condition for `s`.
///
/// Fails when `1/(p+1) + 1/(q+1) ≤ (n-1)/n`, in which case no `s` works.
pub fn select_s(n: usize, p: f64, q: f64) -> Result<ExponentWitness> {
    if n == 0 {
        return Err(Error::Domain("dimension n must be at least 1".into()));
    }
    if !(p > 1.0 && q > 1.0) || !p.is_finite() || !q.is_finite() {
        return Err(Error::Domain(format!("exponents must exceed 1 (p = {p}, q = {q})")));
    }
    let nf = n as f64;
    let s_lo = (nf * (p - 1.0) / (2.0 * (p + 1.0))).max(0.0);
    let s_hi = ((nf + 2.0 - q * (nf - 2.0)) / (2.0 * (q + 1.0))).min(1.0);
    if s_lo >= s_hi {
        let lhs = 1.0 / (p + 1.0) + 1.0 / (q + 1.0);
        let rhs = (nf - 1.0) / nf;
        return Err(Error::Infeasible(format!(
            "1/(p+1) + 1/(q+1) = {lhs:.6} must exceed (n-1)/n = {rhs:.6} for n = {n}, p = {p}, q = {q}; \
             the admissible s-interval ({s_lo:.6}, {s_hi:.6}) is empty"
        )));
    }
    Ok(ExponentWitness {
        n,
        p,
        q,
        interval: (s_lo, s_hi),
        s: 0.5 * (s_lo + s_hi),
    })
}
