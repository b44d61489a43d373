use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rfh::flow::{integrate_flow, FlowSettings};
use rfh::functional::FunctionalContext;
use rfh::nonlinearity::{select_s, Coefficient, ExponentWitness, NonlinearitySpec};
use rfh::perturbation::{FiniteRankOperator, PerturbationMap};
use rfh::spectral::{EsSpace, ExtendedPoint, PairField, Spectrum};

fn spectrum_strategy() -> impl Strategy<Value = Spectrum> {
    prop_oneof![
        (1usize..6).prop_map(|n| Spectrum::circle(n).unwrap()),
        prop::collection::btree_set(1i32..40, 1..6)
            .prop_flat_map(|set| {
                let values: Vec<i32> = set.into_iter().collect();
                let n = values.len();
                (Just(values), prop::collection::vec((any::<bool>(), 1usize..3), n))
            })
            .prop_map(|(values, extra)| {
                let eig = values
                    .iter()
                    .zip(extra)
                    .map(|(&v, (neg, m))| (if neg { -(v as f64) / 4.0 } else { v as f64 / 4.0 }, m))
                    .collect();
                Spectrum::synthetic(eig).unwrap()
            }),
    ]
}

fn power33() -> NonlinearitySpec {
    NonlinearitySpec::power(Coefficient::Constant(1.0), Coefficient::Constant(1.0), 3.0, 3.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pairing_identity_and_isometry(spec in spectrum_strategy(), s in 0.05f64..0.95, seed in any::<u64>()) {
        let space = EsSpace::new(spec.clone(), s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = PairField::random(spec.num_modes(), 1.0, &mut rng);
        let b = PairField::random(spec.num_modes(), 1.0, &mut rng);
        let scale = (a.l2_norm_sq() * b.l2_norm_sq()).sqrt();
        prop_assert!((space.es_inner(&space.ds_apply(&a), &b) - a.l2_inner(&b)).abs() <= 1e-12 * scale);
        let na = space.es_norm(&a);
        prop_assert!((space.es_norm(&space.ds_l_apply(&a)) - na).abs() <= 1e-12 * na);
    }

    #[test]
    fn projections_split(spec in spectrum_strategy(), s in 0.05f64..0.95, seed in any::<u64>()) {
        let space = EsSpace::new(spec.clone(), s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = PairField::random(spec.num_modes(), 1.0, &mut rng);
        let (p, m) = (space.project(&z, true), space.project(&z, false));
        let n = space.es_norm(&z);
        prop_assert!(space.es_norm(&space.project(&p, true).add_scaled(-1.0, &p)) <= 1e-12 * n);
        prop_assert!(space.es_norm(&p.add_scaled(1.0, &m).add_scaled(-1.0, &z)) <= 1e-12 * n);
        prop_assert!(space.es_norm(&space.ds_l_apply(&p).add_scaled(-1.0, &p)) <= 1e-12 * n);
        prop_assert!(space.es_norm(&space.ds_l_apply(&m).add_scaled(1.0, &m)) <= 1e-12 * n);
    }

    #[test]
    fn action_is_circle_invariant(theta in 0.0f64..std::f64::consts::TAU, seed in any::<u64>(), lambda in -3.0f64..3.0) {
        for h in [NonlinearitySpec::quadratic(), power33()] {
            let ctx = FunctionalContext::from_parts(Spectrum::circle(3).unwrap(), 0.5, h).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z = PairField::random(6, 0.7, &mut rng);
            let a = ctx.action(&ExtendedPoint::new(z.clone(), lambda)).unwrap();
            let b = ctx.action(&ExtendedPoint::new(z.rotated(theta), lambda)).unwrap();
            prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
        }
    }

    #[test]
    fn hitting_operator_maps_x_to_y(
        x in prop::collection::vec(-5.0f64..5.0, 6),
        y in prop::collection::vec(-5.0f64..5.0, 6),
        orthogonal in any::<bool>(),
    ) {
        let x = DVector::from_vec(x);
        prop_assume!(x.norm() > 1e-3);
        let mut y = DVector::from_vec(y);
        if orthogonal {
            y -= &x * (x.dot(&y) / x.norm_squared());
        }
        prop_assume!(y.norm() > 1e-3);
        let k = FiniteRankOperator::hitting(&x, &y).unwrap();
        prop_assert!((k.apply(&x) - &y).norm() <= 1e-12 * y.norm().max(1.0) * x.norm().max(1.0));
        prop_assert!(k.symmetry_defect() < 1e-12);
    }

    #[test]
    fn metric_quadratic_form_bounds(seed in any::<u64>(), target in 0.01f64..0.49) {
        let dim = 9;
        let pert = PerturbationMap::random(&DVector::zeros(dim), 3, 2, 0.3, target, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let w = DVector::from_fn(dim, |_, _| rng.gen_range(-0.3..0.3));
        let xi = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let nn = xi.norm_squared();
        prop_assert!(pert.apply_metric(&w, &xi).dot(&xi) >= 0.5 * nn);
        prop_assert!(pert.metric(&w, &xi, &xi).unwrap() >= 2.0 / 9.0 * nn);
    }

    #[test]
    fn select_s_agrees_with_scan(p in 1.05f64..12.0, q in 1.05f64..12.0, n in 1usize..5) {
        let scan = (1..2000).map(|i| i as f64 / 2000.0).any(|s| ExponentWitness::admits(n, p, q, s));
        match select_s(n, p, q) {
            Ok(w) => prop_assert!(ExponentWitness::admits(n, p, q, w.s)),
            Err(_) => prop_assert!(!scan),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn flow_decreases_action(seed in any::<u64>(), lambda in -2.0f64..2.0, power in any::<bool>()) {
        let h = if power { power33() } else { NonlinearitySpec::quadratic() };
        let ctx = FunctionalContext::from_parts(Spectrum::circle(2).unwrap(), 0.5, h).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w0 = ExtendedPoint::new(PairField::random(4, 0.5, &mut rng), lambda);
        let t = integrate_flow(&ctx, None, &w0, 0.2, &FlowSettings::default()).unwrap();
        let scale = t.actions.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        prop_assert!(t.max_action_increase() <= 1e-10 * scale);
    }
}
