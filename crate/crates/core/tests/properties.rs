use nalgebra::{DMatrix, DVector};
use noisy_slp::lp::{criticality, solve_lp, LinearRow, LpProblem, LpStatus};
use noisy_slp::oracle::sample_ball;
use noisy_slp::solver::{stabilized_ratio, update_radii, SolverConfig};
use noisy_slp::PolyhedralSpec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn penalty_instance() -> impl Strategy<Value = (PolyhedralSpec, DVector<f64>, DMatrix<f64>)> {
    (0usize..3, 0usize..3, 1usize..4, 0.01f64..10.0).prop_flat_map(|(n_ineq, n_eq, n, nu)| {
        let p = 1 + n_ineq + n_eq;
        (
            prop::collection::vec(-3.0f64..3.0, p),
            prop::collection::vec(-2.0f64..2.0, p * n),
        )
            .prop_map(move |(f, j)| {
                (
                    PolyhedralSpec::composite_penalty(nu, n_ineq, n_eq).unwrap(),
                    DVector::from_vec(f),
                    DMatrix::from_vec(p, n, j),
                )
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn criticality_scales_with_the_radius((spec, f, j) in penalty_instance(), radius in 0.01f64..5.0) {
        let at_one = criticality(&spec, &f, &j, 1.0).unwrap();
        let at_radius = criticality(&spec, &f, &j, radius).unwrap();
        prop_assert!(at_one >= 0.0);
        prop_assert!(at_radius >= radius.min(1.0) * at_one - 1e-8);
        // Ψ is nondecreasing in the radius.
        if radius >= 1.0 {
            prop_assert!(at_radius >= at_one - 1e-8);
        } else {
            prop_assert!(at_radius <= at_one + 1e-8);
        }
    }

    #[test]
    fn eval_change_is_a_difference((spec, f, j) in penalty_instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dz = sample_ball(&mut rng, f.len(), 2.0);
        let moved = &f + &dz;
        let direct = spec.eval(moved.as_slice()).unwrap() - spec.eval(f.as_slice()).unwrap();
        prop_assert!((spec.eval_change(f.as_slice(), dz.as_slice()) - direct).abs() <= 1e-12 * (1.0 + direct.abs()) + 1e-12);
        prop_assert_eq!(j.nrows(), f.len());
    }

    #[test]
    fn penalty_is_lipschitz((spec, f, _j) in penalty_instance(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dz = sample_ball(&mut rng, f.len(), 1.0);
        let change = spec.eval_change(f.as_slice(), dz.as_slice()).abs();
        prop_assert!(change <= spec.lipschitz() * dz.norm() + 1e-12);
    }

    #[test]
    fn ball_samples_stay_inside(seed in any::<u64>(), dim in 1usize..50, radius in 0.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(sample_ball(&mut rng, dim, radius).norm() <= radius);
    }

    #[test]
    fn boxed_lps_are_solved_feasibly(
        objective in prop::collection::vec(-1.0f64..1.0, 1..6),
        rows in prop::collection::vec((prop::collection::vec(-1.0f64..1.0, 6), 0.0f64..2.0), 0..8),
    ) {
        let n = objective.len();
        let mut lp = LpProblem::new(objective).with_bounds(vec![-1.0; n], vec![1.0; n]);
        for (coeffs, rhs) in rows {
            // rhs ≥ 0 keeps the origin feasible.
            lp = lp.with_ub_row(LinearRow::dense(&coeffs[..n], rhs));
        }
        let sol = solve_lp(&lp).unwrap();
        prop_assert_eq!(sol.status, LpStatus::Optimal);
        prop_assert!(lp.max_violation(&sol.x) <= 1e-9);
        prop_assert!(sol.objective <= 1e-12);
        prop_assert!((lp.objective_value(&sol.x) - sol.objective).abs() <= 1e-12);
    }

    #[test]
    fn radii_respect_their_bounds(
        delta in 1e-6f64..100.0,
        delta_lp in 1e-6f64..10.0,
        rho in prop::option::of(-5.0f64..5.0),
        alpha_exp in 0u32..10,
        fraction in 0.0f64..1.0,
    ) {
        let config = SolverConfig::default();
        let alpha = 0.5f64.powi(alpha_exp as i32);
        let step_lp = alpha * delta_lp * fraction;
        let step_2 = delta * fraction;
        let (next, next_lp) = update_radii(&config, delta, delta_lp, rho, alpha, step_2, step_lp);
        prop_assert!(next_lp <= config.delta_lp_max);
        prop_assert!(next_lp >= 0.0);
        let r = rho.unwrap_or(f64::NEG_INFINITY);
        if r < config.rho_u {
            prop_assert!(next_lp <= delta_lp);
            prop_assert!(next_lp <= config.theta_shrink * step_lp + 1e-300);
        }
        if r >= config.rho_s {
            prop_assert!(next >= delta);
        } else {
            prop_assert!(next <= config.kappa_u * delta);
            prop_assert!(next >= config.kappa_l * step_2);
        }
    }

    #[test]
    fn large_stabilizer_accepts(phi in -10.0f64..10.0, trial in -10.0f64..10.0, decrease in 0.0f64..1.0) {
        let rho = stabilized_ratio(phi, trial, decrease, 1e9).unwrap();
        prop_assert!(rho > 0.9);
        let plain = stabilized_ratio(phi, trial, decrease, 0.0);
        if decrease > 0.0 {
            prop_assert!((plain.unwrap() - (phi - trial) / decrease).abs() <= 1e-9 * (1.0 + plain.unwrap().abs()));
        } else {
            prop_assert!(plain.is_none());
        }
    }
}
