//! Exact integer optimum by depth-first enumeration.
//!
//! Used as an oracle for the LP path, so it shares nothing with the simplex code beyond the
//! instance representation: every value is an integer and every comparison exact.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::simplex::implied_upper_bounds;
use super::{LpInstance, Residual};

/// Maximum number of enumeration nodes visited before giving up.
pub const SEARCH_GUARD: u128 = 100_000_000;

const MEMO_LIMIT: usize = 1_000_000;

const LAGRANGE_ITERATIONS: usize = 3_000;

/// Exact optimum of `inst` over the integers, fixed variables included.
///
/// Variables are assigned in index order, each over every value its remaining row slack
/// allows. A branch is abandoned only when a row-based bound proves it cannot beat the
/// incumbent, or when an equivalent state was already explored with at least the same value,
/// so the result is the exhaustive optimum. When some row has a
/// negative coefficient the bound is unavailable and the full box is enumerated instead.
pub fn brute_force_ilp(inst: &LpInstance) -> Result<i64> {
    let res = inst.residual();
    let ub = implied_upper_bounds(&res);
    if ub.iter().any(Option::is_none) {
        return Err(Error::SearchSpaceTooLarge(u128::MAX));
    }
    let ub: Vec<i64> = ub.into_iter().map(Option::unwrap).collect();
    let nonneg = res.rows.iter().all(|(t, _)| t.iter().all(|&(_, a)| a >= 0));
    let best = if nonneg { Search::new(&res, ub).run()? } else { enumerate_box(&res, &ub)? };
    Ok(best + res.fixed_objective)
}

fn enumerate_box(res: &Residual, ub: &[i64]) -> Result<i64> {
    let size = ub.iter().fold(1u128, |acc, &u| acc.saturating_mul(u as u128 + 1));
    if size > SEARCH_GUARD {
        return Err(Error::SearchSpaceTooLarge(size));
    }
    let n = ub.len();
    let mut x = vec![0i64; n];
    let mut best = 0;
    loop {
        let feasible = res
            .rows
            .iter()
            .all(|(terms, rhs)| terms.iter().map(|&(j, a)| a * x[j]).sum::<i64>() <= *rhs);
        if feasible {
            best = best.max(res.objective.iter().zip(&x).map(|(c, v)| c * v).sum());
        }
        let mut j = 0;
        while j < n && x[j] == ub[j] {
            x[j] = 0;
            j += 1;
        }
        if j == n {
            return Ok(best);
        }
        x[j] += 1;
    }
}

struct Search<'a> {
    res: &'a Residual,
    ub: Vec<i64>,
    /// Rows containing each variable, with the coefficient.
    var_rows: Vec<Vec<(usize, i64)>>,
    /// Families of pairwise disjoint rows used for bounding.
    families: Vec<Vec<usize>>,
    slack: Vec<i64>,
    /// Rows that still contain an unassigned variable when variable `j` is next, with the
    /// most that variables `j..` can still take from each.
    live: Vec<Vec<(usize, i64)>>,
    /// Reduced objective `c_j - y·A_j` under fixed Lagrange multipliers `y >= 0`.
    reduced: Vec<f64>,
    dual: Vec<f64>,
    /// Highest partial objective already explored from a given remaining state.
    seen: HashMap<(usize, Vec<u16>), i64>,
    value: i64,
    best: i64,
    nodes: u128,
}

impl<'a> Search<'a> {
    fn new(res: &'a Residual, ub: Vec<i64>) -> Self {
        let n = res.free.len();
        let mut var_rows = vec![Vec::new(); n];
        for (r, (terms, _)) in res.rows.iter().enumerate() {
            for &(j, a) in terms {
                if a > 0 {
                    var_rows[j].push((r, a));
                }
            }
        }
        let mut by_len: Vec<usize> = (0..res.rows.len()).filter(|&r| res.rows[r].0.len() > 1).collect();
        by_len.sort_by_key(|&r| std::cmp::Reverse(res.rows[r].0.len()));
        let longest_first = disjoint_family(res, &by_len);
        by_len.reverse();
        let shortest_first = disjoint_family(res, &by_len);
        let live = (0..=n)
            .map(|j| {
                res.rows
                    .iter()
                    .enumerate()
                    .filter_map(|(r, (terms, _))| {
                        let demand: i64 = terms.iter().filter(|&&(v, _)| v >= j).map(|&(v, a)| a * ub[v]).sum();
                        terms.iter().any(|&(v, _)| v >= j).then_some((r, demand))
                    })
                    .collect()
            })
            .collect();
        let dual = lagrange_multipliers(res, &ub);
        let mut reduced: Vec<f64> = res.objective.iter().map(|&c| c as f64).collect();
        for (r, (terms, _)) in res.rows.iter().enumerate() {
            for &(j, a) in terms {
                reduced[j] -= dual[r] * a as f64;
            }
        }
        Search {
            res,
            reduced,
            dual,
            ub,
            var_rows,
            live,
            seen: HashMap::new(),
            families: vec![longest_first, shortest_first],
            slack: res.rows.iter().map(|(_, b)| *b).collect(),
            value: 0,
            best: 0,
            nodes: 0,
        }
    }

    fn run(mut self) -> Result<i64> {
        self.visit(0)?;
        Ok(self.best)
    }

    fn cap(&self, j: usize) -> i64 {
        self.var_rows[j]
            .iter()
            .map(|&(r, a)| self.slack[r] / a)
            .fold(self.ub[j], i64::min)
            .max(0)
    }

    /// Upper bound on what variables `from..` can still add to the objective. Stops refining
    /// once the bound is at most `enough`.
    fn bound(&self, from: usize, enough: i64) -> i64 {
        let n = self.ub.len();
        let gain: Vec<i64> = (0..n)
            .map(|j| if j < from { 0 } else { self.res.objective[j].max(0) * self.cap(j) })
            .collect();
        let free_sum: i64 = gain.iter().sum();
        let mut best = free_sum;
        for family in &self.families {
            let mut total = free_sum;
            for &r in family {
                let (terms, _) = &self.res.rows[r];
                let row_gain: i64 = terms.iter().map(|&(j, _)| gain[j]).sum();
                // Rate bound: slack times the best objective per unit of row capacity.
                let (mut num, mut den) = (0i64, 1i64);
                for &(j, a) in terms {
                    if j >= from && self.res.objective[j] > 0 && self.res.objective[j] * den > num * a {
                        num = self.res.objective[j];
                        den = a;
                    }
                }
                let rate = self.slack[r] * num / den;
                total -= row_gain - row_gain.min(rate);
            }
            best = best.min(total);
        }
        if best <= enough {
            return best;
        }
        let best = best.min(self.lagrange_bound(from));
        if best <= enough {
            return best;
        }
        best.min(self.cover_bound(from, &gain))
    }

    /// Weak duality with the fixed multipliers: for any `y >= 0` the completion is worth at
    /// most `Σ y_r s_r + Σ_j cap_j max(0, c_j - y·A_j)`. Rounded down with a margin, since the
    /// integer completion cannot exceed the real bound.
    fn lagrange_bound(&self, from: usize) -> i64 {
        let rows: f64 = self.live[from]
            .iter()
            .map(|&(r, demand)| self.dual[r] * self.slack[r].min(demand) as f64)
            .sum();
        let vars: f64 = (from..self.ub.len()).map(|j| self.reduced[j].max(0.0) * self.cap(j) as f64).sum();
        let total = rows + vars;
        if total >= i64::MAX as f64 / 2.0 {
            i64::MAX / 2
        } else {
            (total + 1e-6).floor() as i64
        }
    }

    /// Greedy covering bound: every remaining variable is charged either its own gain or,
    /// through one chosen row, a share of that row's rate bound. Rows may overlap, which only
    /// loosens the bound.
    fn cover_bound(&self, from: usize, gain: &[i64]) -> i64 {
        let rows = &self.res.rows;
        let rate: Vec<i64> = rows
            .iter()
            .enumerate()
            .map(|(r, (terms, _))| {
                let (mut num, mut den) = (0i64, 1i64);
                for &(j, a) in terms {
                    let c = self.res.objective[j];
                    if j >= from && c > 0 && c * den > num * a {
                        num = c;
                        den = a;
                    }
                }
                self.slack[r] * num / den
            })
            .collect();
        let mut covered = vec![false; gain.len()];
        let mut total = 0i64;
        loop {
            let mut pick: Option<(usize, i64)> = None;
            for (r, (terms, _)) in rows.iter().enumerate() {
                let saved: i64 = terms.iter().filter(|&&(j, _)| !covered[j]).map(|&(j, _)| gain[j]).sum();
                let benefit = saved - rate[r];
                if benefit > 0 && pick.is_none_or(|(_, b)| benefit > b) {
                    pick = Some((r, benefit));
                }
            }
            let Some((r, _)) = pick else { break };
            total += rate[r];
            for &(j, _) in &rows[r].0 {
                covered[j] = true;
            }
        }
        total + gain.iter().zip(&covered).filter(|(_, c)| !**c).map(|(g, _)| g).sum::<i64>()
    }

    fn visit(&mut self, j: usize) -> Result<()> {
        self.nodes += 1;
        if self.nodes > SEARCH_GUARD {
            return Err(Error::SearchSpaceTooLarge(self.nodes));
        }
        if j == self.ub.len() {
            self.best = self.best.max(self.value);
            return Ok(());
        }
        // Two partial assignments leaving the same usable slack on every live row have the
        // same completions, so only the one with the higher value needs exploring. Slack
        // beyond what the remaining variables can take is not usable.
        let key: Option<Vec<u16>> =
            self.live[j].iter().map(|&(r, demand)| u16::try_from(self.slack[r].min(demand)).ok()).collect();
        if let Some(key) = key {
            let key = (j, key);
            match self.seen.get(&key) {
                Some(&v) if v >= self.value => return Ok(()),
                _ if self.seen.len() < MEMO_LIMIT => {
                    self.seen.insert(key, self.value);
                }
                _ => {}
            }
        }
        if self.value + self.bound(j, self.best - self.value) <= self.best {
            return Ok(());
        }
        let c = self.res.objective[j];
        let top = if c > 0 { self.cap(j) } else { 0 };
        for v in (0..=top).rev() {
            for &(r, a) in &self.var_rows[j] {
                self.slack[r] -= a * v;
            }
            self.value += c * v;
            let out = self.visit(j + 1);
            self.value -= c * v;
            for &(r, a) in &self.var_rows[j] {
                self.slack[r] += a * v;
            }
            out?;
        }
        Ok(())
    }
}

/// Approximately minimises the Lagrangian dual `L(y) = Σ y_r b_r + Σ_j ub_j max(0, c_j - y·A_j)`
/// over `y >= 0` by projected subgradient steps. Any `y >= 0` gives a valid bound, so the
/// result only needs to be good, not optimal.
fn lagrange_multipliers(res: &Residual, ub: &[i64]) -> Vec<f64> {
    let m = res.rows.len();
    let n = ub.len();
    let c: Vec<f64> = res.objective.iter().map(|&v| v.max(0) as f64).collect();
    let b: Vec<f64> = res.rows.iter().map(|(_, rhs)| *rhs as f64).collect();
    let dual_value = |y: &[f64], reduced: &mut Vec<f64>| {
        reduced.clone_from(&c);
        for (r, (terms, _)) in res.rows.iter().enumerate() {
            for &(j, a) in terms {
                reduced[j] -= y[r] * a as f64;
            }
        }
        let rows: f64 = y.iter().zip(&b).map(|(y, b)| y * b).sum();
        rows + reduced.iter().zip(ub).map(|(r, &u)| r.max(0.0) * u as f64).sum::<f64>()
    };
    // A greedy feasible value is the target of the Polyak steps.
    let mut slack = b.clone();
    let mut target = 0.0;
    for j in 0..n {
        let mut x = ub[j] as f64;
        for (r, (terms, _)) in res.rows.iter().enumerate() {
            if let Some(&(_, a)) = terms.iter().find(|&&(v, _)| v == j) {
                x = x.min((slack[r] / a as f64).floor());
            }
        }
        if c[j] <= 0.0 {
            x = 0.0;
        }
        for (r, (terms, _)) in res.rows.iter().enumerate() {
            if let Some(&(_, a)) = terms.iter().find(|&&(v, _)| v == j) {
                slack[r] -= a as f64 * x;
            }
        }
        target += c[j] * x;
    }
    let mut y = vec![0.0; m];
    let mut reduced = vec![0.0; n];
    let mut best_y = y.clone();
    let mut best = dual_value(&y, &mut reduced);
    let mut theta = 1.0;
    let mut stall = 0;
    for _ in 0..LAGRANGE_ITERATIONS {
        let value = dual_value(&y, &mut reduced);
        if value < best - 1e-9 {
            best = value;
            best_y.clone_from(&y);
            stall = 0;
        } else {
            stall += 1;
            if stall == 50 {
                theta /= 2.0;
                stall = 0;
                if theta < 1e-4 {
                    break;
                }
            }
        }
        let g: Vec<f64> = res
            .rows
            .iter()
            .zip(&b)
            .map(|((terms, _), &b)| {
                b - terms.iter().filter(|&&(j, _)| reduced[j] > 0.0).map(|&(j, a)| a as f64 * ub[j] as f64).sum::<f64>()
            })
            .collect();
        let norm: f64 = g.iter().zip(&y).map(|(g, &y)| if y <= 0.0 && *g > 0.0 { 0.0 } else { g * g }).sum();
        if norm < 1e-12 {
            break;
        }
        let step = theta * (value - target).max(0.05) / norm;
        for (y, g) in y.iter_mut().zip(&g) {
            *y = (*y - step * g).max(0.0);
        }
    }
    best_y
}

fn disjoint_family(res: &Residual, order: &[usize]) -> Vec<usize> {
    let mut used = vec![false; res.free.len()];
    let mut family = Vec::new();
    for &r in order {
        let terms = &res.rows[r].0;
        if terms.iter().all(|&(j, _)| !used[j]) {
            for &(j, _) in terms {
                used[j] = true;
            }
            family.push(r);
        }
    }
    family
}
