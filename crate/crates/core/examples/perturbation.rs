//! Finite-rank symmetric perturbations of the metric and the perturbed flow.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfh::flow::{energy_identity_check, integrate_flow, FlowSettings};
use rfh::functional::FunctionalContext;
use rfh::nonlinearity::NonlinearitySpec;
use rfh::perturbation::{FiniteRankOperator, PerturbationMap};
use rfh::spectral::{ExtendedPoint, PairField, Spectrum};

fn main() -> rfh::Result<()> {
    let x = DVector::from_vec(vec![1.0, 2.0, 0.0, -1.0]);
    for y in [
        DVector::from_vec(vec![0.5, 0.0, 1.0, 0.0]),
        DVector::from_vec(vec![2.0, -1.0, 3.0, 0.0]),
    ] {
        let k = FiniteRankOperator::hitting(&x, &y)?;
        println!(
            "(x, y) = {:>5.2}: {} rank-one terms, |K(x) - y| = {:.1e}, symmetry {:.1e}",
            x.dot(&y),
            k.terms.len(),
            (k.apply(&x) - &y).norm(),
            k.symmetry_defect()
        );
    }

    let ctx = FunctionalContext::from_parts(Spectrum::circle(3)?, 0.5, NonlinearitySpec::quadratic())?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let w0 = ExtendedPoint::new(PairField::random(6, 0.5, &mut rng), 1.0);
    let origin = ctx.space().coords(&w0);
    let pert = PerturbationMap::random(&origin, 6, 2, 0.1, 0.45, 17)?;
    println!("sup ‖K‖ ≤ {:.3}", pert.norm_bound());

    let plain = integrate_flow(&ctx, None, &w0, 0.5, &FlowSettings::default())?;
    let bent = integrate_flow(&ctx, Some(&pert), &w0, 0.5, &FlowSettings::default())?;
    for (name, t) in [("unperturbed", &plain), ("perturbed", &bent)] {
        let e = energy_identity_check(t);
        println!(
            "{name:>12}: action {:.6} -> {:.6}, energy defect {:.1e}",
            t.actions[0],
            t.actions.last().unwrap(),
            e.relative_defect
        );
    }
    let d = ctx.space().coords(plain.final_state()) - ctx.space().coords(bent.final_state());
    println!("endpoint separation {:.4}", d.norm());
    Ok(())
}
