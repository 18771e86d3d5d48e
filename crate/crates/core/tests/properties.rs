//! Randomized properties of the relaxations and the bounding loops.

mod common;

use polyrecourse::fixtures;
use polyrecourse::momentsolve::{extract_minimizers, flat_truncation, TruncatedMomentSequence};
use polyrecourse::polyalg::VariableSpace;
use polyrecourse::sosrelax::{build_lower_approx_program, Order, Truncation};
use polyrecourse::twostage::AlgorithmConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn raising_the_order_never_lowers_the_objective(seed in any::<u64>()) {
        let rm = common::random_model(&mut ChaCha8Rng::seed_from_u64(seed));
        let k0 = rm.deg.div_ceil(2);
        let solve = |k| {
            build_lower_approx_program(&rm.model, &rm.nu, &Order::Full(k), &Truncation::Full)
                .and_then(|p| p.solve(&Default::default()))
                .unwrap()
        };
        let lo = solve(k0);
        let hi = solve(k0 + 1);
        prop_assert!(hi.objective - lo.objective >= -1e-7, "{} < {}", hi.objective, lo.objective);
    }

    #[test]
    fn approximation_stays_below_the_objective_on_k(seed in any::<u64>()) {
        let rm = common::random_model(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = build_lower_approx_program(&rm.model, &rm.nu, &Order::Full(rm.deg.div_ceil(2)), &Truncation::Full)
            .and_then(|p| p.solve(&Default::default()))
            .unwrap();
        let grid = common::feasible_grid(&rm.model, 1000);
        prop_assert!(!grid.is_empty());
        let v = common::soundness_violation(&rm.model, &a.p, &grid);
        prop_assert!(v <= 1e-6, "violation {v:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn general_loop_bounds_are_monotone(alpha in 0.05..0.9f64, pick in 0usize..3) {
        let fx = fixtures::cubic_interval().unwrap();
        let order = ["1,2,2", "1,3,2", "2,2,2"][pick];
        let cfg = AlgorithmConfig {
            alpha,
            epsilon: 1e-9,
            order: Order::parse(order).unwrap(),
            max_iters: 3,
            ..fx.settings.config()
        };
        let r = fx.problem.algorithm_general(&cfg).unwrap();
        for w in r.history.windows(2) {
            prop_assert!(w[1].v_minus >= w[0].v_minus - 1e-9);
            prop_assert!(w[1].v_plus <= w[0].v_plus + 1e-9);
        }
        for h in &r.history {
            prop_assert!(h.v_minus <= h.v_plus + 1e-6);
        }
    }

    #[test]
    fn finite_support_loop_bounds_are_monotone(alpha in 0.05..0.9f64) {
        let fx = fixtures::bilinear_two_scenarios().unwrap();
        let cfg = AlgorithmConfig { alpha, epsilon: 1e-9, max_iters: 3, ..fx.settings.config() };
        let r = fx.problem.algorithm_finite_support(&cfg).unwrap();
        for w in r.history.windows(2) {
            prop_assert!(w[1].v_minus >= w[0].v_minus - 1e-9);
            prop_assert!(w[1].v_plus <= w[0].v_plus + 1e-9);
        }
    }
}

proptest! {
    #[test]
    fn atoms_are_recovered_from_their_moments(
        a in prop::collection::vec(-2.0..2.0f64, 2),
        shift in prop::collection::vec(0.5..1.5f64, 2),
        w in 0.2..0.8f64,
        two in any::<bool>(),
    ) {
        let s = VariableSpace::single("w", 2);
        let mut pts = vec![a.clone()];
        let mut ws = vec![1.0];
        if two {
            pts.push(vec![a[0] + shift[0], a[1] - shift[1]]);
            ws = vec![w, 1.0 - w];
        }
        let z = TruncatedMomentSequence::from_atoms(s, &pts, &ws, 6);
        let fr = flat_truncation(&z, 1, 3, 1, 1e-9).unwrap();
        prop_assert_eq!(fr.rank(), Some(pts.len()));
        let ex = extract_minimizers(&z, fr.t.unwrap(), pts.len(), 1).unwrap();
        for (p, wi) in pts.iter().zip(&ws) {
            let hit = ex.points.iter().zip(&ex.weights).any(|(q, wq)| {
                (q[0] - p[0]).abs() < 1e-6 && (q[1] - p[1]).abs() < 1e-6 && (wq - wi).abs() < 1e-6
            });
            prop_assert!(hit, "{p:?} not in {:?}", ex.points);
        }
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let fx = fixtures::disk_two_moments().unwrap();
    let a = fx.run().unwrap().to_csv();
    let b = fx.run().unwrap().to_csv();
    assert_eq!(a, b);
}
