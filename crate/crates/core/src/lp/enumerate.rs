//! Brute-force reference solver for tiny LPs with finite bounds.

use nalgebra::{DMatrix, DVector};

use super::LpProblem;

/// Minimum of the objective over all basic feasible points, found by trying
/// every choice of `n` active constraints among rows and bounds.
///
/// Returns `None` when no vertex is feasible within `tol`. Only meant for a
/// handful of variables; the cost is combinatorial.
pub fn enumerate_vertices(problem: &LpProblem, tol: f64) -> Option<(f64, Vec<f64>)> {
    let n = problem.n_vars();
    // Candidate active constraints as (coefficients, rhs); equalities are
    // always active.
    let mut optional: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &problem.ub_rows {
        optional.push((dense(&row.coeffs, n), row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        optional.push((e.clone(), problem.lower[j]));
        optional.push((e, problem.upper[j]));
    }
    let forced: Vec<(Vec<f64>, f64)> = problem
        .eq_rows
        .iter()
        .map(|row| (dense(&row.coeffs, n), row.rhs))
        .collect();
    if forced.len() > n {
        return None;
    }
    let k = n - forced.len();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut choice: Vec<usize> = (0..k).collect();
    loop {
        let rows: Vec<&(Vec<f64>, f64)> = forced
            .iter()
            .chain(choice.iter().map(|&i| &optional[i]))
            .collect();
        let a = DMatrix::from_fn(n, n, |i, j| rows[i].0[j]);
        let b = DVector::from_iterator(n, rows.iter().map(|r| r.1));
        if let Some(x) = a.lu().solve(&b) {
            let x: Vec<f64> = x.iter().copied().collect();
            if x.iter().all(|v| v.is_finite()) && problem.max_violation(&x) <= tol {
                let value = problem.objective_value(&x);
                if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
                    best = Some((value, x));
                }
            }
        }
        if !next_combination(&mut choice, optional.len()) {
            break;
        }
    }
    best
}

fn dense(coeffs: &[(usize, f64)], n: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(j, c) in coeffs {
        v[j] += c;
    }
    v
}

fn next_combination(choice: &mut [usize], total: usize) -> bool {
    let k = choice.len();
    for i in (0..k).rev() {
        if choice[i] < total - k + i {
            choice[i] += 1;
            for j in i + 1..k {
                choice[j] = choice[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
