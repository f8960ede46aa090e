//! Bounded-variable revised primal simplex with an explicit basis inverse.
//!
//! Rows are brought to equality form `A x + s = b` by one slack per
//! inequality. Nonbasic variables may sit anywhere inside their bounds (they
//! start at the projection of zero), which lets trust-region subproblems
//! start from the zero step and leave untouched coordinates at zero.
//!
//! The basis inverse is stored densely in column-major order and updated by
//! rank-one pivots that only touch the nonzero pattern of the pivot column
//! and row. Basic values and duals are recomputed from the inverse every
//! `refresh_interval` pivots (every `m/8` for bases larger than that);
//! small bases are also reinverted from scratch.

use log::{debug, warn};

use super::{LpProblem, LpSolution, LpStatus, LP_TOL};

const PIVOT_TOL: f64 = 1e-11;
const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PricingRule {
    /// Lowest-index improving column, lowest-index leaving row on ties.
    Bland,
    /// Most negative reduced cost; falls back to Bland after a streak of
    /// degenerate pivots and returns to Dantzig after the next real step.
    Dantzig,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub pricing: PricingRule,
    /// Consecutive degenerate pivots before Dantzig pricing hands over to Bland.
    pub degenerate_streak: usize,
    pub refresh_interval: usize,
    /// Bases up to this size are reinverted on every refresh.
    pub reinvert_limit: usize,
    /// Pivot budget; `None` means `50·(rows + columns)`.
    pub max_pivots: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            pricing: PricingRule::Dantzig,
            degenerate_streak: 20,
            refresh_interval: 50,
            reinvert_limit: 300,
            max_pivots: None,
        }
    }
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

struct Engine<'o> {
    options: &'o SimplexOptions,
    m: usize,
    n_struct: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    rhs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    basic_row: Vec<usize>,
    /// Column-major `m × m`: entry `(i, k)` lives at `k * m + i`.
    binv: Vec<f64>,
    y: Vec<f64>,
    pivots: usize,
    since_refresh: usize,
    degenerate_run: usize,
    bland_mode: bool,
    // scratch
    w: Vec<f64>,
    w_nz: Vec<usize>,
    row_r: Vec<f64>,
    row_nz: Vec<usize>,
}

pub(super) fn solve(problem: &LpProblem, options: &SimplexOptions) -> LpSolution {
    let mut engine = Engine::build(problem, options);
    let n_total = engine.lower.len();
    let budget = options
        .max_pivots
        .unwrap_or(50 * (engine.m + n_total).max(1));

    let artificial: Vec<usize> = (0..n_total)
        .filter(|&j| j >= engine.n_struct + problem.ub_rows.len())
        .collect();
    if !artificial.is_empty() {
        engine.cost = vec![0.0; n_total];
        for &j in &artificial {
            engine.cost[j] = 1.0;
        }
        engine.recompute_duals();
        match engine.run(budget) {
            Some(LpStatus::IterLimit) => return engine.finish(problem, LpStatus::IterLimit),
            _ => {}
        }
        engine.refresh_values();
        let infeasibility: f64 = artificial.iter().map(|&j| engine.x[j]).sum();
        let scale = 1.0 + engine.rhs.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        if infeasibility > 1e-7 * scale {
            debug!("phase one ended with infeasibility {infeasibility:e}");
            return engine.finish(problem, LpStatus::Infeasible);
        }
        for &j in &artificial {
            engine.upper[j] = 0.0;
            if engine.basic_row[j] == NONE {
                engine.x[j] = 0.0;
            }
        }
        engine.degenerate_run = 0;
        engine.bland_mode = false;
    }

    engine.cost = vec![0.0; n_total];
    engine.cost[..engine.n_struct].copy_from_slice(&problem.objective);
    engine.recompute_duals();
    let status = engine.run(budget).unwrap_or(LpStatus::Optimal);
    engine.finish(problem, status)
}

impl<'o> Engine<'o> {
    fn build(problem: &LpProblem, options: &'o SimplexOptions) -> Self {
        let n = problem.n_vars();
        let m_ub = problem.ub_rows.len();
        let m = problem.n_rows();

        // Column-major copy of the structural part.
        let mut counts = vec![0usize; n];
        for row in problem.ub_rows.iter().chain(&problem.eq_rows) {
            for &(j, _) in &row.coeffs {
                counts[j] += 1;
            }
        }
        let mut col_start = Vec::with_capacity(n + m + 1);
        col_start.push(0);
        for c in &counts {
            col_start.push(col_start.last().unwrap() + c);
        }
        let nnz = *col_start.last().unwrap();
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = col_start[..n].to_vec();
        for (i, row) in problem.ub_rows.iter().chain(&problem.eq_rows).enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    col_row[fill[j]] = i;
                    col_val[fill[j]] = v;
                    fill[j] += 1;
                }
            }
        }
        // Drop the slots reserved for explicit zeros.
        let mut compact_start = vec![0usize; n + 1];
        let mut compact_row = Vec::with_capacity(nnz);
        let mut compact_val = Vec::with_capacity(nnz);
        for j in 0..n {
            for k in col_start[j]..fill[j] {
                compact_row.push(col_row[k]);
                compact_val.push(col_val[k]);
            }
            compact_start[j + 1] = compact_row.len();
        }
        let mut col_start = compact_start;
        let mut col_row = compact_row;
        let mut col_val = compact_val;

        let rhs: Vec<f64> = problem
            .ub_rows
            .iter()
            .chain(&problem.eq_rows)
            .map(|r| r.rhs)
            .collect();
        let mut lower = problem.lower.clone();
        let mut upper = problem.upper.clone();
        let mut x: Vec<f64> = lower
            .iter()
            .zip(&upper)
            .map(|(&l, &u)| 0.0f64.clamp(l, u))
            .collect();

        // Slacks.
        for i in 0..m_ub {
            col_row.push(i);
            col_val.push(1.0);
            col_start.push(col_row.len());
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(0.0);
        }

        // Residual of each row at the starting point.
        let mut residual = rhs.clone();
        for j in 0..n {
            for k in col_start[j]..col_start[j + 1] {
                residual[col_row[k]] -= col_val[k] * x[j];
            }
        }

        // Crash: singleton columns that absorb the residual within bounds,
        // slacks first, artificials for the rest.
        let mut singletons: Vec<Vec<usize>> = vec![Vec::new(); m];
        for i in 0..m_ub {
            singletons[i].push(n + i);
        }
        for j in 0..n {
            if col_start[j + 1] - col_start[j] == 1 {
                singletons[col_row[col_start[j]]].push(j);
            }
        }
        let mut basis = vec![NONE; m];
        let mut pivot_coef = vec![1.0; m];
        let mut taken = vec![false; n + m_ub];
        for i in 0..m {
            for &c in &singletons[i] {
                if taken[c] {
                    continue;
                }
                let a = col_val[col_start[c]];
                let value = x[c] + residual[i] / a;
                let tol = LP_TOL * (1.0 + value.abs());
                if value >= lower[c] - tol && value <= upper[c] + tol {
                    x[c] = value.clamp(lower[c], upper[c]);
                    basis[i] = c;
                    pivot_coef[i] = a;
                    taken[c] = true;
                    break;
                }
            }
        }
        for i in 0..m {
            if basis[i] == NONE {
                let sign = if residual[i] < 0.0 { -1.0 } else { 1.0 };
                col_row.push(i);
                col_val.push(sign);
                col_start.push(col_row.len());
                lower.push(0.0);
                upper.push(f64::INFINITY);
                x.push(residual[i].abs());
                basis[i] = lower.len() - 1;
                pivot_coef[i] = sign;
            }
        }

        let n_total = lower.len();
        let mut basic_row = vec![NONE; n_total];
        for (i, &b) in basis.iter().enumerate() {
            basic_row[b] = i;
        }
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0 / pivot_coef[i];
        }

        Engine {
            options,
            m,
            n_struct: n,
            col_start,
            col_row,
            col_val,
            rhs,
            lower,
            upper,
            cost: vec![0.0; n_total],
            x,
            basis,
            basic_row,
            binv,
            y: vec![0.0; m],
            pivots: 0,
            since_refresh: 0,
            degenerate_run: 0,
            bland_mode: options.pricing == PricingRule::Bland,
            w: vec![0.0; m],
            w_nz: Vec::with_capacity(m),
            row_r: vec![0.0; m],
            row_nz: Vec::with_capacity(m),
        }
    }

    /// Runs pivots until optimality (`None`) or a terminal status.
    fn run(&mut self, budget: usize) -> Option<LpStatus> {
        loop {
            if self.pivots >= budget {
                return Some(LpStatus::IterLimit);
            }
            match self.step() {
                Step::Optimal => {
                    // Confirm against freshly recomputed duals before stopping.
                    if self.since_refresh > 0 {
                        self.refresh();
                        if matches!(self.price(), None) {
                            return None;
                        }
                        continue;
                    }
                    return None;
                }
                Step::Unbounded => return Some(LpStatus::Unbounded),
                Step::Moved => {}
            }
            // Large bases refresh less often so the O(m²) recomputation
            // stays a fixed fraction of the pivoting work.
            if self.since_refresh >= self.options.refresh_interval.max(self.m / 8) {
                self.refresh();
            }
        }
    }

    fn reduced_cost(&self, j: usize) -> f64 {
        let mut d = self.cost[j];
        for k in self.col_start[j]..self.col_start[j + 1] {
            d -= self.y[self.col_row[k]] * self.col_val[k];
        }
        d
    }

    /// Entering column and direction, if any column improves the objective.
    fn price(&self) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.lower.len() {
            if self.basic_row[j] != NONE || self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j);
            let dir = if d < -LP_TOL && self.x[j] < self.upper[j] - LP_TOL {
                1.0
            } else if d > LP_TOL && self.x[j] > self.lower[j] + LP_TOL {
                -1.0
            } else {
                continue;
            };
            if self.bland_mode {
                return Some((j, dir, d));
            }
            if best.is_none_or(|(_, _, bd)| d.abs() > bd.abs()) {
                best = Some((j, dir, d));
            }
        }
        best
    }

    fn step(&mut self) -> Step {
        let Some((q, dir, d_q)) = self.price() else {
            return Step::Optimal;
        };

        // w = B⁻¹ a_q
        self.w.iter_mut().for_each(|v| *v = 0.0);
        let m = self.m;
        for k in self.col_start[q]..self.col_start[q + 1] {
            let col = self.col_row[k];
            let a = self.col_val[k];
            let binv_col = &self.binv[col * m..(col + 1) * m];
            for (wi, bi) in self.w.iter_mut().zip(binv_col) {
                *wi += a * bi;
            }
        }
        self.w_nz.clear();
        for (i, &wi) in self.w.iter().enumerate() {
            if wi.abs() > PIVOT_TOL {
                self.w_nz.push(i);
            }
        }

        // Ratio test.
        let own = if dir > 0.0 {
            self.upper[q] - self.x[q]
        } else {
            self.x[q] - self.lower[q]
        };
        let mut best_t = f64::INFINITY;
        let mut leave = NONE;
        for &i in &self.w_nz {
            let rate = -dir * self.w[i];
            let b = self.basis[i];
            let limit = if rate < 0.0 {
                if self.lower[b] == f64::NEG_INFINITY {
                    continue;
                }
                (self.x[b] - self.lower[b]) / -rate
            } else {
                if self.upper[b] == f64::INFINITY {
                    continue;
                }
                (self.upper[b] - self.x[b]) / rate
            };
            let limit = limit.max(0.0);
            let better = if leave == NONE {
                true
            } else if limit < best_t - 1e-12 * (1.0 + best_t) {
                true
            } else if limit <= best_t + 1e-12 * (1.0 + best_t) {
                if self.bland_mode {
                    b < self.basis[leave]
                } else {
                    let (wa, wb) = (self.w[i].abs(), self.w[leave].abs());
                    wa > wb || (wa == wb && b < self.basis[leave])
                }
            } else {
                false
            };
            if better {
                best_t = if leave == NONE { limit } else { best_t.min(limit) };
                leave = i;
            }
        }

        if own.is_infinite() && leave == NONE {
            return Step::Unbounded;
        }

        let flip = own <= best_t;
        let t = if flip { own } else { best_t };
        if t <= 1e-12 {
            self.degenerate_run += 1;
            if self.options.pricing == PricingRule::Dantzig
                && self.degenerate_run >= self.options.degenerate_streak
            {
                self.bland_mode = true;
            }
        } else {
            self.degenerate_run = 0;
            if self.options.pricing == PricingRule::Dantzig {
                self.bland_mode = false;
            }
        }

        // Move.
        if t > 0.0 {
            self.x[q] += dir * t;
            for &i in &self.w_nz {
                let b = self.basis[i];
                self.x[b] -= dir * t * self.w[i];
            }
        }
        self.pivots += 1;
        self.since_refresh += 1;

        if flip {
            self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
            return Step::Moved;
        }

        let r = leave;
        let leaving = self.basis[r];
        let rate = -dir * self.w[r];
        self.x[leaving] = if rate < 0.0 {
            self.lower[leaving]
        } else {
            self.upper[leaving]
        };
        self.pivot(r, q, d_q);
        Step::Moved
    }

    fn pivot(&mut self, r: usize, q: usize, d_q: f64) {
        let m = self.m;
        let w_r = self.w[r];
        self.row_nz.clear();
        for k in 0..m {
            let v = self.binv[k * m + r];
            if v != 0.0 {
                let scaled = v / w_r;
                self.row_r[k] = scaled;
                self.row_nz.push(k);
            }
        }
        for &k in &self.row_nz {
            let factor = self.row_r[k];
            let col = &mut self.binv[k * m..(k + 1) * m];
            for &i in &self.w_nz {
                if i != r {
                    col[i] -= self.w[i] * factor;
                }
            }
            col[r] = factor;
        }
        for &k in &self.row_nz {
            self.y[k] += d_q * self.row_r[k];
        }

        let leaving = self.basis[r];
        self.basic_row[leaving] = NONE;
        self.basis[r] = q;
        self.basic_row[q] = r;
    }

    fn refresh(&mut self) {
        if self.m <= self.options.reinvert_limit {
            self.reinvert();
        }
        self.refresh_values();
        self.recompute_duals();
        self.since_refresh = 0;
    }

    /// `x_B = B⁻¹ (b − N x_N)`.
    fn refresh_values(&mut self) {
        let m = self.m;
        let mut residual = self.rhs.clone();
        for j in 0..self.lower.len() {
            if self.basic_row[j] != NONE || self.x[j] == 0.0 {
                continue;
            }
            for k in self.col_start[j]..self.col_start[j + 1] {
                residual[self.col_row[k]] -= self.col_val[k] * self.x[j];
            }
        }
        let mut values = vec![0.0; m];
        for (k, &rk) in residual.iter().enumerate() {
            if rk == 0.0 {
                continue;
            }
            let col = &self.binv[k * m..(k + 1) * m];
            for (v, b) in values.iter_mut().zip(col) {
                *v += rk * b;
            }
        }
        for (i, v) in values.into_iter().enumerate() {
            self.x[self.basis[i]] = v;
        }
    }

    /// `y = c_Bᵀ B⁻¹`.
    fn recompute_duals(&mut self) {
        let m = self.m;
        let c_b: Vec<f64> = self.basis.iter().map(|&b| self.cost[b]).collect();
        if c_b.iter().all(|&c| c == 0.0) {
            self.y.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for k in 0..m {
            let col = &self.binv[k * m..(k + 1) * m];
            self.y[k] = col.iter().zip(&c_b).map(|(b, c)| b * c).sum();
        }
    }

    /// Rebuilds `B⁻¹` from the basis columns by Gauss–Jordan elimination
    /// with partial pivoting. Keeps the old inverse if the basis is singular.
    fn reinvert(&mut self) {
        let m = self.m;
        if m == 0 {
            return;
        }
        // Row-major augmented [B | I].
        let width = 2 * m;
        let mut aug = vec![0.0; m * width];
        for (i, &b) in self.basis.iter().enumerate() {
            for k in self.col_start[b]..self.col_start[b + 1] {
                aug[self.col_row[k] * width + i] = self.col_val[k];
            }
        }
        for i in 0..m {
            aug[i * width + m + i] = 1.0;
        }
        for col in 0..m {
            let (piv, piv_abs) = (col..m)
                .map(|r| (r, aug[r * width + col].abs()))
                .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
            if piv_abs < 1e-13 {
                warn!("basis reinversion hit a singular pivot; keeping updated inverse");
                return;
            }
            if piv != col {
                for k in 0..width {
                    aug.swap(piv * width + k, col * width + k);
                }
            }
            let p = aug[col * width + col];
            for k in 0..width {
                aug[col * width + k] /= p;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = aug[r * width + col];
                if f == 0.0 {
                    continue;
                }
                for k in 0..width {
                    aug[r * width + k] -= f * aug[col * width + k];
                }
            }
        }
        for i in 0..m {
            for k in 0..m {
                self.binv[k * m + i] = aug[i * width + m + k];
            }
        }
    }

    fn finish(&mut self, problem: &LpProblem, status: LpStatus) -> LpSolution {
        if status == LpStatus::Optimal {
            self.refresh_values();
            let x = &self.x[..self.n_struct];
            if problem.max_violation(x) > LP_TOL && self.m > self.options.reinvert_limit {
                self.reinvert();
                self.refresh_values();
            }
        }
        let x = self.x[..self.n_struct].to_vec();
        let objective = problem.objective_value(&x);
        LpSolution {
            status,
            x,
            objective,
            pivots: self.pivots,
        }
    }
}
