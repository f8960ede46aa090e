use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use noisy_slp::lp::{
    criticality, enumerate_vertices, solve_lp, solve_lp_with, solve_subproblem, LinearRow,
    LpProblem, LpStatus, PricingRule, SimplexOptions,
};
use noisy_slp::PolyhedralSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_lp(rng: &mut ChaCha8Rng, with_eq: bool) -> LpProblem {
    let n = rng.random_range(1..=4);
    let rows = rng.random_range(0..=6);
    let objective: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.0)).collect();
    let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.1..3.0)).collect();
    let mut lp = LpProblem::new(objective).with_bounds(lower, upper);
    for _ in 0..rows {
        let coeffs: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(-1.0..1.0) })
            .collect();
        lp = lp.with_ub_row(LinearRow::dense(&coeffs, rng.random_range(-1.0..2.0)));
    }
    if with_eq && n > 1 {
        let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        lp = lp.with_eq_row(LinearRow::dense(&coeffs, rng.random_range(-0.5..0.5)));
    }
    lp
}

#[test]
fn minimizes_over_an_interval() {
    let lp = LpProblem::new(vec![1.0]).with_bounds(vec![-1.0], vec![1.0]);
    let sol = solve_lp(&lp).unwrap();
    assert_eq!(sol.status, LpStatus::Optimal);
    assert_eq!(sol.x, vec![-1.0]);
    assert_eq!(sol.objective, -1.0);
}

#[test]
fn optimum_on_a_facet() {
    let lp = LpProblem::new(vec![-1.0, -1.0])
        .with_bounds(vec![0.0, 0.0], vec![1.0, 1.0])
        .with_ub_row(LinearRow::dense(&[1.0, 1.0], 1.0));
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    assert_relative_eq!(sol.objective, -1.0, epsilon = 1e-12);
    assert_relative_eq!(sol.x[0] + sol.x[1], 1.0, epsilon = 1e-12);
}

#[test]
fn matches_vertex_enumeration_on_random_lps() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut infeasible = 0;
    for _ in 0..500 {
        let lp = random_lp(&mut rng, false);
        let sol = solve_lp(&lp).unwrap();
        match enumerate_vertices(&lp, 1e-9) {
            Some((best, _)) => {
                assert_eq!(sol.status, LpStatus::Optimal, "{lp:?}");
                assert!((sol.objective - best).abs() <= 1e-9, "{} vs {best}", sol.objective);
                assert!(lp.max_violation(&sol.x) <= 1e-9);
            }
            None => {
                infeasible += 1;
                assert_eq!(sol.status, LpStatus::Infeasible, "{lp:?}");
            }
        }
    }
    assert!(infeasible < 250);
}

#[test]
fn equality_rows_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..300 {
        let lp = random_lp(&mut rng, true);
        let sol = solve_lp(&lp).unwrap();
        match enumerate_vertices(&lp, 1e-9) {
            Some((best, _)) => {
                assert!(sol.is_optimal(), "{lp:?}");
                assert!((sol.objective - best).abs() <= 1e-9);
                assert!(lp.max_violation(&sol.x) <= 1e-9);
            }
            None => assert_eq!(sol.status, LpStatus::Infeasible),
        }
    }
}

#[test]
fn bland_pricing_agrees_with_dantzig() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let bland = SimplexOptions {
        pricing: PricingRule::Bland,
        ..SimplexOptions::default()
    };
    for _ in 0..200 {
        let lp = random_lp(&mut rng, true);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp_with(&lp, &bland).unwrap();
        assert_eq!(a.status, b.status);
        if a.is_optimal() {
            assert!((a.objective - b.objective).abs() <= 1e-9);
        }
    }
}

#[test]
fn detects_unbounded_and_infeasible() {
    let unbounded = LpProblem::new(vec![-1.0, 0.0])
        .with_bounds(vec![0.0, 0.0], vec![f64::INFINITY, 1.0])
        .with_ub_row(LinearRow::dense(&[-1.0, 1.0], 0.0));
    assert_eq!(solve_lp(&unbounded).unwrap().status, LpStatus::Unbounded);

    let infeasible = LpProblem::new(vec![1.0])
        .with_bounds(vec![0.0], vec![1.0])
        .with_ub_row(LinearRow::dense(&[-1.0], -2.0));
    assert_eq!(solve_lp(&infeasible).unwrap().status, LpStatus::Infeasible);
}

#[test]
fn free_variables_with_equalities() {
    // min x + 2y  s.t.  x − y = 1,  x + y ≥ 1, y free, x ∈ [−5, 5]
    let lp = LpProblem::new(vec![1.0, 2.0])
        .with_bounds(vec![-5.0, f64::NEG_INFINITY], vec![5.0, f64::INFINITY])
        .with_eq_row(LinearRow::dense(&[1.0, -1.0], 1.0))
        .with_ub_row(LinearRow::dense(&[-1.0, -1.0], -1.0));
    let sol = solve_lp(&lp).unwrap();
    assert!(sol.is_optimal());
    assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(sol.x[1], 0.0, epsilon = 1e-12);
}

#[test]
fn invalid_problems_are_rejected() {
    let lp = LpProblem::new(vec![1.0]).with_bounds(vec![1.0], vec![0.0]);
    assert!(solve_lp(&lp).is_err());
    let lp = LpProblem::new(vec![1.0]).with_ub_row(LinearRow::new(vec![(3, 1.0)], 0.0));
    assert!(solve_lp(&lp).is_err());
}

#[test]
fn solves_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let lp = random_lp(&mut rng, true);
        let a = solve_lp(&lp).unwrap();
        let b = solve_lp(&lp).unwrap();
        assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn larger_sparse_problem_is_feasible_and_optimal() {
    // A chain of absolute differences: min Σ|x_i − x_{i+1}| + Σ|x_i − t_i|.
    let n = 60;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let targets: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    let spec = PolyhedralSpec::composite_penalty(0.3, 0, 2 * n - 1).unwrap();
    let p = 2 * n;
    let mut f = DVector::zeros(p);
    let mut jac = DMatrix::zeros(p, n);
    for i in 0..n {
        f[1 + i] = -targets[i];
        jac[(1 + i, i)] = 1.0;
    }
    for i in 0..n - 1 {
        jac[(1 + n + i, i)] = 1.0;
        jac[(1 + n + i, i + 1)] = -1.0;
    }
    let sol = solve_subproblem(&spec, &f, &jac, 2.0).unwrap();
    // Medians of the chain keep the value below the trivial choices.
    let at_targets = spec.eval((&f + &jac * DVector::from_vec(targets.clone())).as_slice()).unwrap();
    assert!(sol.value <= at_targets + 1e-9);
    assert!(sol.value <= spec.eval(f.as_slice()).unwrap() + 1e-9);
}

#[test]
fn subproblem_examples() {
    let identity = PolyhedralSpec::Identity;
    let f = DVector::from_vec(vec![0.0]);
    let jac = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
    let sol = solve_subproblem(&identity, &f, &jac, 1.0).unwrap();
    assert_eq!(sol.d.as_slice(), &[-1.0, 0.0, 0.0]);
    assert_eq!(sol.value, -1.0);

    let spec = PolyhedralSpec::composite_penalty(1.0, 0, 1).unwrap();
    let f = DVector::from_vec(vec![0.0, 3.0]);
    let jac = DMatrix::from_row_slice(2, 1, &[0.0, -1.0]);
    let sol = solve_subproblem(&spec, &f, &jac, 1.0).unwrap();
    assert_relative_eq!(sol.d[0], 1.0, epsilon = 1e-12);
    assert_relative_eq!(sol.value, 2.0, epsilon = 1e-12);
}

#[test]
fn criticality_examples() {
    let identity = PolyhedralSpec::Identity;
    let f = DVector::from_vec(vec![7.0]);
    let jac = DMatrix::from_row_slice(1, 2, &[3.0, -4.0]);
    assert_relative_eq!(criticality(&identity, &f, &jac, 1.0).unwrap(), 7.0, epsilon = 1e-12);

    let spec = PolyhedralSpec::composite_penalty(0.5, 1, 2).unwrap();
    let f = DVector::from_vec(vec![1.0, 2.0, -1.0, 0.5]);
    let jac = DMatrix::zeros(4, 3);
    assert_eq!(criticality(&spec, &f, &jac, 1.0).unwrap(), 0.0);
}

fn random_penalty_instance(rng: &mut ChaCha8Rng) -> (PolyhedralSpec, DVector<f64>, DMatrix<f64>) {
    let n = rng.random_range(1..=3);
    let n_ineq = rng.random_range(0..=2);
    let n_eq = rng.random_range(0..=2);
    let spec = PolyhedralSpec::composite_penalty(rng.random_range(0.1..2.0), n_ineq, n_eq).unwrap();
    let p = spec.dim();
    let f = DVector::from_fn(p, |_, _| rng.random_range(-1.0..1.0));
    let jac = DMatrix::from_fn(p, n, |_, _| rng.random_range(-1.0..1.0));
    (spec, f, jac)
}

#[test]
fn subproblem_matches_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..200 {
        let (spec, f, jac) = random_penalty_instance(&mut rng);
        let n = jac.ncols();
        let radius = rng.random_range(0.1..2.0);
        let sol = solve_subproblem(&spec, &f, &jac, radius).unwrap();
        // The minimum of a piecewise-linear function over a box is attained
        // at a vertex of its linearity regions; a grid gives an upper bound
        // and, refined, converges to the optimum.
        let steps = match n {
            1 => 4000,
            2 => 200,
            _ => 40,
        };
        let lipschitz = spec.lipschitz() * jac.norm();
        let h = 2.0 * radius / steps as f64;
        let mut best = f64::INFINITY;
        let mut idx = vec![0usize; n];
        loop {
            let d = DVector::from_iterator(n, idx.iter().map(|&i| -radius + h * i as f64));
            best = best.min(spec.eval((&f + &jac * d).as_slice()).unwrap());
            let mut k = 0;
            while k < n {
                idx[k] += 1;
                if idx[k] <= steps {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
        let grid_error = lipschitz * h * (n as f64).sqrt() / 2.0;
        assert!(sol.value <= best + 1e-9);
        assert!(sol.value >= best - grid_error - 1e-9);
        if n == 1 {
            assert!(sol.value >= best - 1e-6 - grid_error);
        }
    }
}

#[test]
fn epigraph_is_exact_for_fixed_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let (spec, f, jac) = random_penalty_instance(&mut rng);
        let n = jac.ncols();
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut sub = noisy_slp::lp::build_subproblem(&spec, &f, &jac, 1.0).unwrap();
        for (j, &v) in d.iter().enumerate() {
            sub.lp.lower[j] = v;
            sub.lp.upper[j] = v;
        }
        let sol = solve_lp(&sub.lp).unwrap();
        assert!(sol.is_optimal());
        let direct = spec.eval((&f + &jac * DVector::from_vec(d)).as_slice()).unwrap();
        assert_relative_eq!(sub.constant + sol.objective, direct, epsilon = 1e-9, max_relative = 1e-9);
    }
}

#[test]
fn criticality_normalization() {
    let mut rng = ChaCha8Rng::seed_from_u64(51);
    for _ in 0..500 {
        let (spec, f, jac) = random_penalty_instance(&mut rng);
        let psi1 = criticality(&spec, &f, &jac, 1.0).unwrap();
        for radius in [0.1, 0.5, 2.0, 10.0] {
            let psi = criticality(&spec, &f, &jac, radius).unwrap();
            assert!(psi >= f64::min(radius, 1.0) * psi1 - 1e-8 * (1.0 + psi1));
        }
    }
}

#[test]
fn max_affine_subproblem_matches_enumeration() {
    let spec = PolyhedralSpec::max_affine(vec![
        noisy_slp::polyhedral::AffinePiece { a: vec![1.0, 1.0], b: 0.0 },
        noisy_slp::polyhedral::AffinePiece { a: vec![-1.0, 0.5], b: 0.2 },
    ])
    .unwrap();
    let f = DVector::from_vec(vec![0.3, -0.2]);
    let jac = DMatrix::from_row_slice(2, 1, &[1.0, 2.0]);
    let sol = solve_subproblem(&spec, &f, &jac, 1.0).unwrap();
    let mut best = f64::INFINITY;
    for i in 0..=20000 {
        let d = -1.0 + i as f64 * 1e-4;
        best = best.min(spec.eval(&[0.3 + d, -0.2 + 2.0 * d]).unwrap());
    }
    assert!((sol.value - best).abs() < 1e-4);
}
