//! Continuation flow between the quadratic Hamiltonian and a rescaled copy,
//! with the boundedness budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfh::flow::{integrate_homotopy, FlowSettings, HomotopySchedule};
use rfh::functional::FunctionalContext;
use rfh::nonlinearity::NonlinearitySpec;
use rfh::spectral::{ExtendedPoint, PairField, Spectrum};

fn main() -> rfh::Result<()> {
    let start = FunctionalContext::from_parts(Spectrum::circle(4)?, 0.5, NonlinearitySpec::quadratic())?;
    println!("max β' = {:.4}", HomotopySchedule::max_beta_slope(10_000));
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let w0 = ExtendedPoint::new(PairField::random(8, 0.3, &mut rng), 3.0);
    for scale in [1.001, 1.1, 3.0] {
        let end = start.with_nonlinearity(NonlinearitySpec::quadratic().with_scale(scale))?;
        let schedule = HomotopySchedule::new(start.clone(), end)?.with_epsilon(1.0);
        let r = integrate_homotopy(&schedule, &w0, 1.0, &FlowSettings::default())?;
        println!(
            "scale {scale:>6}: budget {:.3e} (< ε/5: {}), sup ‖z‖ {:.4}, sup |λ| {:.4}",
            r.budget, r.budget_ok, r.sup_z_norm, r.sup_lambda
        );
    }
    Ok(())
}
