//! Spectrum of D on the circle, the induced levels of L, and the E_s pairing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rfh::spectral::{EsSpace, PairField, Spectrum};

fn main() -> rfh::Result<()> {
    let spectrum = Spectrum::circle(4)?;
    println!("D eigenvalues: {:?}", spectrum.mode_eigenvalues());

    let l = spectrum.l_spectrum();
    for (k, mu, m) in l.levels() {
        println!("  k = {k:>3}  λ_k = {mu:>9.4}  m_k = {m}");
    }

    let space = EsSpace::new(spectrum.clone(), 0.3)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = PairField::random(spectrum.num_modes(), 1.0, &mut rng);
    let b = PairField::random(spectrum.num_modes(), 1.0, &mut rng);
    let lhs = space.es_inner(&space.ds_apply(&a), &b);
    println!("(D_s a, b)_Es = {lhs:.15}");
    println!("(a, b)_L2     = {:.15}", a.l2_inner(&b));
    println!(
        "‖D_s L a‖ / ‖a‖ = {:.15}",
        space.es_norm(&space.ds_l_apply(&a)) / space.es_norm(&a)
    );

    let synthetic = Spectrum::synthetic(vec![(1.0, 1), (-2.0, 1), (3.0, 2)])?;
    println!("synthetic L levels: {:?}", synthetic.l_spectrum().levels());
    Ok(())
}
