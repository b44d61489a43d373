//! Negative gradient flow: the closed-form line from (0, λ₀), a generic
//! trajectory with its energy balance, and a CSV dump.
//!
//! `cargo run --example flow -- traj.csv`

use std::fs::File;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfh::flow::{energy_identity_check, integrate_flow, FlowSettings};
use rfh::functional::FunctionalContext;
use rfh::nonlinearity::{Coefficient, NonlinearitySpec};
use rfh::spectral::{ExtendedPoint, PairField, Spectrum};

fn main() -> rfh::Result<()> {
    let quad = FunctionalContext::from_parts(Spectrum::circle(4)?, 0.5, NonlinearitySpec::quadratic())?;
    let start = ExtendedPoint::new(PairField::zeros(8), 2.0);
    let line = integrate_flow(&quad, None, &start, 1.0, &FlowSettings::default())?;
    let end = line.final_state();
    println!(
        "from (0, 2): λ(1) = {:.12}, ‖z(1)‖ = {:.1e}, {} steps",
        end.lambda,
        end.z.l2_norm_sq().sqrt(),
        line.steps.len()
    );

    let power = NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0)?;
    let ctx = FunctionalContext::from_parts(Spectrum::circle(4)?, 0.5, power)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let w0 = ExtendedPoint::new(PairField::random(8, 0.4, &mut rng), 1.5);
    // superquadratic flows can leave every bounded set in finite time; the
    // integrator then returns the trajectory computed so far
    let traj = match integrate_flow(&ctx, None, &w0, 2.0, &FlowSettings::default()) {
        Ok(t) => t,
        Err(rfh::Error::Stiffness { t, step, partial }) => {
            println!(
                "power flow: step collapsed to {step:.1e} at t = {t:.4}, ‖z‖ = {:.3e}",
                partial.sup_z_norm()
            );
            *partial
        }
        Err(e) => return Err(e),
    };
    let energy = energy_identity_check(&traj);
    println!(
        "power flow: {:?} at t = {:.3}, action {:.6} -> {:.6}",
        traj.termination,
        traj.final_time(),
        traj.actions[0],
        traj.actions.last().unwrap()
    );
    println!(
        "  monotone {}, energy defect {:.2e} (relative)",
        traj.is_action_monotone(1e-12),
        energy.relative_defect
    );

    if let Some(path) = std::env::args().nth(1) {
        traj.write_csv(File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
