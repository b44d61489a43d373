//! A critical point of the power-type problem found by Newton's method and
//! rescaled to a solution of the coupled Dirac system.

use rfh::critical::{newton_solve, rescale_to_dirac_solution, NewtonSettings, RescalingConvention};
use rfh::functional::FunctionalContext;
use rfh::nonlinearity::{Coefficient, NonlinearitySpec};
use rfh::spectral::{ExtendedPoint, PairField, Spectrum};

fn main() -> rfh::Result<()> {
    let h = NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0)?;
    let ctx = FunctionalContext::from_parts(Spectrum::circle(4)?, 0.5, h)?;
    let j = ctx
        .spectrum()
        .mode_eigenvalues()
        .iter()
        .position(|&e| (e - std::f64::consts::PI).abs() < 1e-12)
        .expect("mode with eigenvalue π");

    let mut z = PairField::zeros(8);
    z.u[j] = 1.0.into();
    z.v[j] = 1.0.into();
    let cp = newton_solve(&ctx, &ExtendedPoint::new(z, 2.0), &NewtonSettings::default())?;
    println!(
        "Newton: {} iterations, residual {:.1e}, λ = {:.12}, |c| = {:.12}",
        cp.iterations,
        cp.residual,
        cp.w.lambda,
        cp.w.z.u[j].norm()
    );
    println!(
        "expected λ = π/√2 = {:.12}, |c| = 2^(1/4) = {:.12}",
        std::f64::consts::PI / 2f64.sqrt(),
        2f64.powf(0.25)
    );

    for conv in [RescalingConvention::Derived, RescalingConvention::AsPrinted] {
        let sol = rescale_to_dirac_solution(&ctx, &cp, conv)?;
        println!(
            "{conv:?}: a = {:.4}, b = {:.4}, |u0_j| = {:.12}, sup residual {:.2e}",
            sol.a,
            sol.b,
            sol.u0[j].norm(),
            sol.sup_residual
        );
    }
    println!("√π = {:.12}", std::f64::consts::PI.sqrt());
    Ok(())
}
