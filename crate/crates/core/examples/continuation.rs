//! Numerically graded complexes for H₀ and a rescaled H₀, compared degree by
//! degree, together with the closed-form grading.

use rfh::critical::{h0_critical_manifolds, NewtonSettings};
use rfh::functional::FunctionalContext;
use rfh::homology::{assemble_complex, h0_gradings, homology, numeric_gradings};
use rfh::nonlinearity::NonlinearitySpec;
use rfh::spectral::Spectrum;

fn main() -> rfh::Result<()> {
    let spectrum = Spectrum::circle(8)?;
    let schedule = [8, 12, 16];
    let coarse = spectrum.truncated(schedule[0])?.l_spectrum();
    let window = (-13, 13);
    let base = FunctionalContext::from_parts(spectrum.clone(), 0.5, NonlinearitySpec::quadratic())?;

    let analytic = h0_gradings(&spectrum.l_spectrum());
    for scale in [1.0, 1.001, 2.0] {
        let ctx = base.with_nonlinearity(NonlinearitySpec::quadratic().with_scale(scale))?;
        let mut comps = h0_critical_manifolds(&ctx)?;
        comps.retain(|c| coarse.eigenvalue(c.k).is_some());
        let graded = numeric_gradings(&ctx, &comps, &schedule, &NewtonSettings::default())?;
        let h = homology(&assemble_complex(&graded, window)?)?;
        println!("scale {scale}:");
        for g in &graded {
            let a = analytic.iter().find(|a| a.k == g.k).expect("same levels");
            println!(
                "  k = {:>3}: ν± = ({:>3}, {:>3})  closed form ({:>3}, {:>3})  action {:.6}",
                g.k,
                g.nu_plus,
                g.nu_minus,
                a.nu_plus,
                a.nu_minus,
                g.action.unwrap_or(f64::NAN)
            );
        }
        for k in [-1, 0, 1] {
            let d = h.at(k).expect("degree in window");
            println!("  H_{k} = {:?} ({:?})", d.dim, d.confidence);
        }
    }
    Ok(())
}
