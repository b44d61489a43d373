//! Admissible fractional exponents and sampled growth hypotheses.

use std::sync::Arc;

use num_complex::Complex64;
use rfh::functional::FunctionalContext;
use rfh::nonlinearity::{
    check_h4, check_hypotheses, select_s, Coefficient, FiberHessian, FnHamiltonian, H4Settings, HypothesisCheck,
    NonlinearitySpec,
};
use rfh::spectral::{CircleGrid, Spectrum};

fn main() -> rfh::Result<()> {
    for (p, q) in [(3.0, 3.0), (1.5, 9.0), (10.0, 1.2)] {
        match select_s(1, p, q) {
            Ok(w) => println!(
                "p = {p}, q = {q}: s in ({:.4}, {:.4}), chosen {:.4}",
                w.interval.0, w.interval.1, w.s
            ),
            Err(e) => println!("p = {p}, q = {q}: {e}"),
        }
    }
    println!("n = 3, p = q = 5: {:?}", select_s(3, 5.0, 5.0).map(|w| w.s));

    let power = NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0)?;
    let report = check_hypotheses(&power, &HypothesisCheck::default())?;
    for h in [&report.h1, &report.h2, &report.h3] {
        println!("{}: passed {} (margin {:.4})", h.name, h.passed, h.worst_margin);
    }

    let ctx = FunctionalContext::from_parts(Spectrum::circle(4)?, 0.5, power.clone())?;
    let grid = CircleGrid::oversampled(ctx.spectrum(), 4)?;
    let h4 = check_h4(&power, ctx.space(), &grid, &H4Settings::default())?;
    println!(
        "H4 (heuristic): sampled supremum {:.4}, passed {}",
        h4.required, h4.passed
    );

    // a constant Hamiltonian violates the superquadratic condition
    let constant = FnHamiltonian::new(
        |_, _, _| Ok(5.0),
        |_, _, _| Ok((Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))),
        |_, _, _| Ok(FiberHessian::zero()),
    );
    let bad = NonlinearitySpec::custom(Arc::new(constant), 2.0, 2.0);
    let r = check_hypotheses(&bad, &HypothesisCheck::default())?;
    println!("H ≡ 5: H1 passed {}, witness {:?}", r.h1.passed, r.h1.witness);
    Ok(())
}
