//! Action, gradient and Hessian of the Rabinowitz functional, checked
//! against finite differences.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfh::functional::{FunctionalContext, KERNEL_TOL};
use rfh::nonlinearity::{Coefficient, NonlinearitySpec};
use rfh::spectral::{ExtendedPoint, PairField, Spectrum};

fn main() -> rfh::Result<()> {
    // x-dependent coefficient f(x) = 1 + 0.3 cos(2πx), sampled on 64 points
    let f: Vec<f64> = (0..64)
        .map(|m| 1.0 + 0.3 * (2.0 * std::f64::consts::PI * m as f64 / 64.0).cos())
        .collect();
    let h = NonlinearitySpec::power(Coefficient::Sampled(f), Coefficient::Constant(1.0), 3.0, 2.0)?;
    let ctx = FunctionalContext::from_parts(Spectrum::circle(3)?, 0.45, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = ExtendedPoint::new(PairField::random(ctx.spectrum().num_modes(), 0.5, &mut rng), 1.2);

    println!("action          {:.10}", ctx.action(&w)?);
    println!("‖∇A‖_E          {:.10}", ctx.gradient_norm(&w)?);
    println!("∂A/∂λ           {:.10}", ctx.gradient(&w)?.lambda);

    let hess = ctx.hessian_form(&w)?;
    println!(
        "Hessian inertia {:?}, symmetry defect {:.1e}",
        hess.inertia(KERNEL_TOL),
        hess.symmetry_defect()
    );

    for step in [1e-3, 1e-4, 1e-5, 1e-6] {
        let xi = DVector::from_fn(ctx.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let eta = DVector::from_fn(ctx.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let c = ctx.derivative_check(&w, &xi, &eta, step)?;
        println!(
            "step {step:.0e}: gradient rel. error {:.2e}, Hessian rel. error {:.2e}",
            c.gradient_rel_error, c.hessian_rel_error
        );
    }
    Ok(())
}
