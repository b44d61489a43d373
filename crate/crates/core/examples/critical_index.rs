//! Critical manifolds of the quadratic problem and their relative indices,
//! computed over a truncation schedule and compared with closed forms.

use rfh::critical::{
    analytic_index_oracle, counted_index_formula, h0_critical_manifolds, relative_index, CriticalPoint, Extremum,
};
use rfh::functional::{FunctionalContext, KERNEL_TOL};
use rfh::nonlinearity::NonlinearitySpec;
use rfh::spectral::Spectrum;

fn main() -> rfh::Result<()> {
    let spectrum = Spectrum::circle(8)?;
    let lspec = spectrum.l_spectrum();
    let ctx = FunctionalContext::from_parts(spectrum, 0.5, NonlinearitySpec::quadratic())?;
    println!(
        "{:>3} {:>9} {:>4} {:>7} {:>6} {:>11} {:>8} {:>5}",
        "k", "λ", "m", "kernel", "i_rel", "rows", "closed", "count"
    );
    for m in h0_critical_manifolds(&ctx)? {
        if m.k.abs() > 4 {
            continue;
        }
        let cp = CriticalPoint::at(&ctx, m.p_plus.clone())?;
        let r = relative_index(&ctx, &cp, &[8, 12, 16])?;
        let rows: Vec<i64> = r.rows.iter().map(|row| row.i_rel).collect();
        let (closed, _) = analytic_index_oracle(&lspec, m.k, Extremum::Plus)?;
        let (count, _) = counted_index_formula(&lspec, m.k, Extremum::Plus)?;
        let kernel = ctx.hessian_form(&cp.w)?.inertia(KERNEL_TOL).zero;
        println!(
            "{:>3} {:>9.4} {:>4} {:>7} {:>6} {:>11} {:>8} {:>5}",
            m.k,
            m.lambda,
            m.multiplicity,
            kernel,
            r.i_rel,
            format!("{rows:?}"),
            closed,
            count
        );
    }
    Ok(())
}
