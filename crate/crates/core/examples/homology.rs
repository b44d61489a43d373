//! ℤ₂ chain complex of the quadratic problem, its homology, and a shooting
//! experiment for the flow lines inside one critical circle.

use rfh::critical::{h0_critical_manifolds, CriticalPoint};
use rfh::functional::FunctionalContext;
use rfh::homology::{assemble_h0_complex, homology, shoot_connecting_orbits, ShootSettings};
use rfh::nonlinearity::NonlinearitySpec;
use rfh::spectral::Spectrum;

fn main() -> rfh::Result<()> {
    let spectrum = Spectrum::synthetic(vec![(1.0, 1), (-2.0, 1), (3.0, 1), (-4.0, 1)])?;
    let cx = assemble_h0_complex(&spectrum.l_spectrum(), (-4, 4))?;
    for g in &cx.generators {
        println!("{:>5}  degree {:>3}", g.label, g.nu);
    }
    let h = homology(&cx)?;
    for d in &h.degrees {
        println!(
            "H_{:<3} = {:?} ({:?}, range {}..={})",
            d.degree, d.dim, d.confidence, d.min_dim, d.max_dim
        );
    }

    let circle = Spectrum::circle(8)?;
    let hc = homology(&assemble_h0_complex(&circle.l_spectrum(), (-13, 13))?)?;
    println!(
        "circle model: H_-1 = {:?}, H_0 = {:?}",
        hc.at(-1).and_then(|d| d.dim),
        hc.at(0).and_then(|d| d.dim)
    );

    let ctx = FunctionalContext::from_parts(spectrum, 0.5, NonlinearitySpec::quadratic())?;
    let m = h0_critical_manifolds(&ctx)?
        .into_iter()
        .find(|m| m.k == 1)
        .expect("k = 1 level");
    let from = CriticalPoint::at(&ctx, m.p_plus.clone())?;
    let to = CriticalPoint::at(&ctx, m.p_minus.clone())?;
    let shot = shoot_connecting_orbits(&ctx, None, &from, &to, Some(&m), &ShootSettings::default())?;
    println!(
        "p1+ -> p1-: {:?}, {} of {} launches arrive, {} distinct, count mod 2 = {}",
        shot.method, shot.converged, shot.launched, shot.distinct, shot.count_mod2
    );
    Ok(())
}
