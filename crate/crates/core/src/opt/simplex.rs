//! Dense-tableau primal simplex with Bland's rule.

use crate::error::{Error, Result};

use super::{LpInstance, Residual};

/// Distance from the nearest integer tolerated in an LP solution before it is rejected.
pub const INTEGRALITY_TOL: f64 = 1e-6;

const PIVOT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    /// Objective of the rounded solution, fixed variables included.
    pub objective: i64,
    /// One value per variable of the instance, fixed variables included.
    pub values: Vec<u64>,
    /// Simplex pivots performed after presolve.
    pub pivots: usize,
    /// Largest distance of a relaxation value from the nearest integer.
    pub max_fractionality: f64,
}

/// Solves the LP relaxation of `inst` and returns its optimal vertex, rounded.
///
/// Among optimal vertices the one favouring lower variable indices is returned: the objective
/// is perturbed by a tie-break term too small to move away from the true optimum on integral
/// vertices. Every value must lie within [`INTEGRALITY_TOL`] of an integer, and the rounded
/// point is re-checked against all rows in integer arithmetic.
pub fn solve_lp(inst: &LpInstance) -> Result<LpSolution> {
    let res = inst.residual();
    let (free_values, pivots) = solve_residual(&res)?;

    let mut values = vec![0u64; inst.n_vars()];
    for &(v, val) in &inst.fixed {
        values[v] = val;
    }
    let mut max_fractionality = 0.0f64;
    for (k, &x) in free_values.iter().enumerate() {
        let r = x.round();
        max_fractionality = max_fractionality.max((x - r).abs());
        if (x - r).abs() > INTEGRALITY_TOL || r < 0.0 {
            return Err(Error::NonIntegralSolution { var: res.free[k], value: x });
        }
        values[res.free[k]] = r as u64;
    }
    inst.check(&values).map_err(Error::InfeasibleRounding)?;
    Ok(LpSolution { objective: inst.evaluate(&values), values, pivots, max_fractionality })
}

/// Upper bound of every variable implied by rows whose coefficients are all non-negative.
pub(crate) fn implied_upper_bounds(res: &Residual) -> Vec<Option<i64>> {
    let mut ub: Vec<Option<i64>> = vec![None; res.free.len()];
    for (terms, rhs) in &res.rows {
        if terms.iter().any(|&(_, a)| a < 0) {
            continue;
        }
        for &(j, a) in terms {
            if a > 0 {
                let b = rhs / a;
                ub[j] = Some(ub[j].map_or(b, |u| u.min(b)));
            }
        }
    }
    ub
}

fn solve_residual(res: &Residual) -> Result<(Vec<f64>, usize)> {
    let n = res.free.len();
    let ub = implied_upper_bounds(res);
    let nonneg = res.rows.iter().all(|(t, _)| t.iter().all(|&(_, a)| a >= 0));

    let delta = if ub.iter().all(Option::is_some) {
        let span: i64 = res
            .objective
            .iter()
            .zip(&ub)
            .map(|(&c, u)| c.max(0) * u.unwrap_or(0))
            .sum();
        0.25 / (1.0 + span as f64)
    } else {
        0.0
    };
    let cost = |j: usize| res.objective[j] as f64 + delta * (n - j) as f64 / n as f64;

    let mut x = vec![0.0; n];
    // Presolve for non-negative systems: drop variables that must be zero, drop rows that can
    // never bind, and set variables touched by no remaining row to their bound.
    let mut active: Vec<bool> = (0..n).map(|j| ub[j] != Some(0)).collect();
    if nonneg {
        for j in 0..n {
            if res.objective[j] <= 0 && ub[j].is_some() {
                active[j] = false;
            }
        }
    }
    let mut rows: Vec<(Vec<(usize, i64)>, i64)> = res
        .rows
        .iter()
        .map(|(terms, rhs)| (terms.iter().copied().filter(|&(j, _)| active[j]).collect::<Vec<_>>(), *rhs))
        .filter(|(terms, _)| !terms.is_empty())
        .collect();
    if nonneg {
        rows = drop_redundant_rows(rows, n);
    }
    let mut in_row = vec![false; n];
    for (terms, _) in &rows {
        for &(j, _) in terms {
            in_row[j] = true;
        }
    }
    let mut cols = Vec::new();
    for j in 0..n {
        if !active[j] {
            continue;
        }
        if in_row[j] {
            cols.push(j);
        } else if cost(j) > 0.0 {
            match ub[j] {
                Some(u) => x[j] = u as f64,
                None => return Err(Error::Unbounded),
            }
        }
    }
    if cols.is_empty() {
        return Ok((x, 0));
    }

    let mut tab = Tableau::new(&rows, &cols, n, cost);
    let limit = 20_000 + 50 * (tab.m + tab.n_cols);
    let pivots = tab.run(limit)?;
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < cols.len() {
            x[cols[b]] = tab.rhs(r);
        }
    }
    Ok((x, pivots))
}

/// Drops rows that cannot bind given the bounds implied by the rows that stay. Longer rows are
/// tried first; a row is dropped only when every variable in it keeps another bounding row.
fn drop_redundant_rows(rows: Vec<(Vec<(usize, i64)>, i64)>, n: usize) -> Vec<(Vec<(usize, i64)>, i64)> {
    let mut var_rows: Vec<Vec<(usize, i64)>> = vec![Vec::new(); n];
    for (r, (terms, _)) in rows.iter().enumerate() {
        for &(j, a) in terms {
            var_rows[j].push((r, a));
        }
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by_key(|&r| std::cmp::Reverse(rows[r].0.len()));
    let mut kept = vec![true; rows.len()];
    for r in order {
        let (terms, rhs) = &rows[r];
        let mut reach = 0i64;
        let mut bounded = true;
        for &(j, a) in terms {
            let ub = var_rows[j]
                .iter()
                .filter(|&&(o, b)| o != r && kept[o] && b > 0)
                .map(|&(o, b)| rows[o].1 / b)
                .min();
            match ub {
                Some(u) => reach += a * u,
                None => {
                    bounded = false;
                    break;
                }
            }
        }
        if bounded && reach <= *rhs {
            kept[r] = false;
        }
    }
    rows.into_iter().zip(kept).filter(|(_, k)| *k).map(|(row, _)| row).collect()
}

struct Tableau {
    m: usize,
    /// Structural columns followed by one slack per row.
    n_cols: usize,
    width: usize,
    a: Vec<f64>,
    reduced: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn new(rows: &[(Vec<(usize, i64)>, i64)], cols: &[usize], n_free: usize, cost: impl Fn(usize) -> f64) -> Self {
        let m = rows.len();
        let ns = cols.len();
        let n_cols = ns + m;
        let width = n_cols + 1;
        let mut pos = vec![usize::MAX; n_free];
        for (k, &j) in cols.iter().enumerate() {
            pos[j] = k;
        }
        let mut a = vec![0.0; m * width];
        for (r, (terms, rhs)) in rows.iter().enumerate() {
            let row = &mut a[r * width..(r + 1) * width];
            for &(j, coef) in terms {
                row[pos[j]] += coef as f64;
            }
            row[ns + r] = 1.0;
            row[n_cols] = *rhs as f64;
        }
        let mut reduced = vec![0.0; n_cols];
        for (k, &j) in cols.iter().enumerate() {
            reduced[k] = cost(j);
        }
        Tableau { m, n_cols, width, a, reduced, basis: (ns..n_cols).collect() }
    }

    fn rhs(&self, r: usize) -> f64 {
        self.a[r * self.width + self.n_cols]
    }

    fn run(&mut self, limit: usize) -> Result<usize> {
        let mut pivots = 0;
        loop {
            let Some(enter) = (0..self.n_cols).find(|&j| self.reduced[j] > PIVOT_EPS) else {
                return Ok(pivots);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let coef = self.a[r * self.width + enter];
                if coef > PIVOT_EPS {
                    let ratio = self.rhs(r) / coef;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((best, br)) => {
                            if ratio < br - PIVOT_EPS
                                || (ratio <= br + PIVOT_EPS && self.basis[r] < self.basis[best])
                            {
                                Some((r, ratio))
                            } else {
                                Some((best, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, enter);
            pivots += 1;
            if pivots > limit {
                return Err(Error::IterationLimit(limit));
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.a[row * w + col];
        for v in &mut self.a[row * w..(row + 1) * w] {
            *v /= p;
        }
        let pivot_row: Vec<f64> = self.a[row * w..(row + 1) * w].to_vec();
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let f = self.a[r * w + col];
            if f != 0.0 {
                for (v, &pr) in self.a[r * w..(r + 1) * w].iter_mut().zip(&pivot_row) {
                    *v -= f * pr;
                }
                self.a[r * w + col] = 0.0;
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for (v, &pr) in self.reduced.iter_mut().zip(&pivot_row[..self.n_cols]) {
                *v -= f * pr;
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opt::{build_mpc_program, Row};
    use crate::vq::{SlotConfig, TrafficClassSpec, VirtualQueueBank};

    #[test]
    fn small_textbook_lp() {
        // max 3a + 2b, a + b <= 4, a + 3b <= 6, a <= 3  ->  a = 3, b = 1.
        let inst = LpInstance::with_vars(
            vec![3, 2],
            vec![Row::new(vec![(0, 1), (1, 1)], 4), Row::new(vec![(0, 1), (1, 3)], 6), Row::new(vec![(0, 1)], 3)],
        );
        let sol = solve_lp(&inst).unwrap();
        assert_eq!(sol.values, vec![3, 1]);
        assert_eq!(sol.objective, 11);
    }

    #[test]
    fn fractional_vertex_is_rejected() {
        // max a + b, 2a + 2b <= 3 has only fractional optimal vertices.
        let inst = LpInstance::with_vars(vec![1, 1], vec![Row::new(vec![(0, 2), (1, 2)], 3)]);
        assert!(matches!(solve_lp(&inst), Err(Error::NonIntegralSolution { .. })));
    }

    #[test]
    fn unbounded_is_reported() {
        let inst = LpInstance::with_vars(vec![1, 1], vec![Row::new(vec![(0, 1), (1, -1)], 3)]);
        assert_eq!(solve_lp(&inst), Err(Error::Unbounded));
    }

    #[test]
    fn forced_only_instance() {
        let specs = vec![TrafficClassSpec::from_counts(1, 1, 50)];
        let banks = vec![VirtualQueueBank::from_counts(vec![4])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0);
        let inst = build_mpc_program(&banks, &specs, &slot, &[vec![]]).unwrap();
        let sol = solve_lp(&inst).unwrap();
        assert_eq!(sol.values, vec![4]);
        assert_eq!(sol.objective, 0);
    }

    #[test]
    fn fig4_instance_has_objective_one() {
        // Oracle: with Q = (5, 3, 2) and capacity 6 the forced head allocation is 5, and every
        // integer (x2, x3) with x2 <= 3, x3 <= 2, x2 + x3 <= 1 is enumerated below.
        let mut best = 0;
        for x2 in 0..=3u64 {
            for x3 in 0..=2u64 {
                if 5 + x2 + x3 <= 6 && x2 + x3 + 5 <= 100 {
                    best = best.max(x2 + x3);
                }
            }
        }
        assert_eq!(best, 1);

        let specs = vec![TrafficClassSpec::from_counts(1, 3, 100)];
        let banks = vec![VirtualQueueBank::from_counts(vec![5, 3, 2])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0).with_budget(6);
        let inst = build_mpc_program(&banks, &specs, &slot, &[vec![]]).unwrap();
        let sol = solve_lp(&inst).unwrap();
        assert_eq!(sol.objective as u64, best);
        assert_eq!(sol.values[0], 5);
        // Tie-break favours the more urgent queue.
        assert_eq!(sol.values, vec![5, 1, 0]);
    }

    #[test]
    fn degenerate_program_terminates() {
        // Many parallel rows through the origin make every early pivot degenerate.
        let mut rows = Vec::new();
        for k in 0..6 {
            rows.push(Row::new(vec![(0, 1), (1, 1), (2, 1)], 0));
            rows.push(Row::new(vec![(k % 3, 1)], 2));
        }
        rows.push(Row::new(vec![(0, 1), (1, 1), (2, 1)], 5));
        let inst = LpInstance::with_vars(vec![1, 1, 1], rows);
        let sol = solve_lp(&inst).unwrap();
        assert_eq!(sol.objective, 0);
    }
}
