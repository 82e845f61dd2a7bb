//! The allocation program solved at every slot.
//!
//! [`build_mpc_program`] turns the current virtual-queue state and predicted arrivals into a
//! pure-inequality integer program whose right-hand sides are constants. Because its
//! constraint matrix is totally unimodular the program is solved by its LP relaxation
//! ([`solve_lp`]); with no look-ahead it is also a max-flow problem
//! ([`solve_myopic_maxflow`]). [`brute_force_ilp`] and the Ghouila-Houri checker in [`tu`]
//! exist to validate those two claims.

mod ilp;
mod maxflow;
pub mod random;
mod simplex;
pub mod tu;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vq::{mandatory_first_allocation, SlotConfig, TrafficClassSpec, VirtualQueueBank};

pub use ilp::{brute_force_ilp, SEARCH_GUARD};
pub use maxflow::{max_flow, min_cut, solve_myopic_maxflow, FlowEdge, FlowNetwork, FlowResult};
pub use simplex::{solve_lp, LpSolution, INTEGRALITY_TOL};
pub use tu::{check_totally_unimodular_ghouila_houri, reduce_by_unit_rows};

/// Identifies the decision variable `x_i^c(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarKey {
    /// Index into the class list, not the class id.
    pub class: usize,
    /// Virtual queue, 1-based.
    pub queue: usize,
    pub slot: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    /// Recursively expanded `x_i^c(t) <= Q_i^c(t)`.
    Queue { class: usize, queue: usize, slot: usize },
    /// Contract budget of one class over the window.
    ClassBudget { class: usize },
    /// Link capacity of one slot.
    SlotBudget { slot: usize },
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub terms: Vec<(usize, i64)>,
    pub rhs: i64,
    pub kind: RowKind,
}

impl Row {
    pub fn new(terms: Vec<(usize, i64)>, rhs: i64) -> Self {
        Row { terms, rhs, kind: RowKind::Other }
    }
}

/// `max c.x  s.t.  A x <= b, x >= 0, x integral`, plus variables whose value is fixed.
///
/// Fixed variables are mandatory: they are substituted before solving and a row whose
/// right-hand side they exceed leaves no room for the free variables in it (the residual
/// right-hand side is clamped at zero) instead of making the program infeasible.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LpInstance {
    pub objective: Vec<i64>,
    pub rows: Vec<Row>,
    pub vars: Vec<Option<VarKey>>,
    pub fixed: Vec<(usize, u64)>,
}

/// The program left after substituting the fixed variables.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Residual {
    /// Original index of every free variable.
    pub free: Vec<usize>,
    pub objective: Vec<i64>,
    /// Terms are indexed by position in `free`.
    pub rows: Vec<(Vec<(usize, i64)>, i64)>,
    pub fixed_objective: i64,
}

impl LpInstance {
    /// An instance over `n` anonymous variables.
    pub fn with_vars(objective: Vec<i64>, rows: Vec<Row>) -> Self {
        let vars = vec![None; objective.len()];
        LpInstance { objective, rows, vars, fixed: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn is_fixed(&self, var: usize) -> bool {
        self.fixed.iter().any(|&(v, _)| v == var)
    }

    /// Dense constraint matrix, one row per constraint.
    pub fn matrix(&self) -> Vec<Vec<i64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut dense = vec![0; self.n_vars()];
                for &(j, a) in &r.terms {
                    dense[j] += a;
                }
                dense
            })
            .collect()
    }

    /// Objective value of a full assignment.
    pub fn evaluate(&self, values: &[u64]) -> i64 {
        self.objective.iter().zip(values).map(|(&c, &x)| c * x as i64).sum()
    }

    /// Checks a full assignment in exact integer arithmetic under the clamped semantics
    /// described on the type. Returns the first violated row.
    pub fn check(&self, values: &[u64]) -> std::result::Result<(), usize> {
        for &(v, val) in &self.fixed {
            if values[v] != val {
                return Err(usize::MAX);
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            let mut fixed_part = 0i64;
            let mut free_part = 0i64;
            for &(j, a) in &row.terms {
                if self.is_fixed(j) {
                    fixed_part += a * values[j] as i64;
                } else {
                    free_part += a * values[j] as i64;
                }
            }
            if free_part > (row.rhs - fixed_part).max(0) {
                return Err(r);
            }
        }
        Ok(())
    }

    pub(crate) fn residual(&self) -> Residual {
        let n = self.n_vars();
        let mut fixed_val = vec![None; n];
        for &(v, val) in &self.fixed {
            fixed_val[v] = Some(val);
        }
        let mut pos = vec![usize::MAX; n];
        let mut free = Vec::new();
        for j in 0..n {
            if fixed_val[j].is_none() {
                pos[j] = free.len();
                free.push(j);
            }
        }
        let objective = free.iter().map(|&j| self.objective[j]).collect();
        let fixed_objective = self
            .fixed
            .iter()
            .map(|&(v, val)| self.objective[v] * val as i64)
            .sum();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut fixed_part = 0i64;
                let mut terms = Vec::new();
                for &(j, a) in &row.terms {
                    match fixed_val[j] {
                        Some(val) => fixed_part += a * val as i64,
                        None if a != 0 => terms.push((pos[j], a)),
                        None => {}
                    }
                }
                (terms, (row.rhs - fixed_part).max(0))
            })
            .collect();
        Residual { free, objective, rows, fixed_objective }
    }

    /// Maps solver output back to `x[c][i][t]`.
    pub fn to_allocation(&self, values: &[u64], specs: &[TrafficClassSpec], horizon: usize) -> AllocationMatrix {
        let mut alloc = AllocationMatrix::zeros(specs, horizon);
        for (j, key) in self.vars.iter().enumerate() {
            if let Some(k) = key {
                alloc.x[k.class][k.queue - 1][k.slot] = values[j];
            }
        }
        alloc
    }
}

impl fmt::Display for LpInstance {
    /// Plain-text dump: objective, one line per row, then the fixed assignments.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |j: usize| match self.vars.get(j).copied().flatten() {
            Some(k) => format!("x[c{}][q{}][t{}]", k.class, k.queue, k.slot),
            None => format!("x{j}"),
        };
        let term = |a: i64, j: usize| match a {
            1 => name(j),
            -1 => format!("-{}", name(j)),
            _ => format!("{a}*{}", name(j)),
        };
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(|(j, &c)| term(c, j))
            .collect();
        writeln!(f, "max {}", if obj.is_empty() { "0".to_string() } else { obj.join(" + ") })?;
        for (r, row) in self.rows.iter().enumerate() {
            let lhs: Vec<String> = row.terms.iter().map(|&(j, a)| term(a, j)).collect();
            writeln!(f, "r{r:<3} {:?}: {} <= {}", row.kind, lhs.join(" + "), row.rhs)?;
        }
        for &(v, val) in &self.fixed {
            writeln!(f, "fix {} = {}", name(v), val)?;
        }
        Ok(())
    }
}

/// `x[c][i - 1][t]`: packets granted from queue `i` of class `c` in slot `t`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationMatrix {
    pub x: Vec<Vec<Vec<u64>>>,
}

impl AllocationMatrix {
    pub fn zeros(specs: &[TrafficClassSpec], horizon: usize) -> Self {
        AllocationMatrix {
            x: specs.iter().map(|s| vec![vec![0; horizon + 1]; s.k_slots]).collect(),
        }
    }

    /// Allocation of queue `queue` (1-based) of class index `class` in slot `slot`.
    pub fn get(&self, class: usize, queue: usize, slot: usize) -> u64 {
        self.x[class][queue - 1][slot]
    }

    /// Per-queue allocation of one class in slot `slot`.
    pub fn column(&self, class: usize, slot: usize) -> Vec<u64> {
        self.x[class].iter().map(|q| q[slot]).collect()
    }

    pub fn class_total(&self, class: usize, slot: usize) -> u64 {
        self.x[class].iter().map(|q| q[slot]).sum()
    }

    pub fn slot_total(&self, slot: usize) -> u64 {
        (0..self.x.len()).map(|c| self.class_total(c, slot)).sum()
    }

    /// Sum of all allocations except the forced head-queue term of slot 0.
    pub fn objective(&self) -> u64 {
        self.x
            .iter()
            .map(|class| {
                class
                    .iter()
                    .enumerate()
                    .flat_map(|(i, q)| q.iter().enumerate().filter(move |(t, _)| !(i == 0 && *t == 0)))
                    .map(|(_, &v)| v)
                    .sum::<u64>()
            })
            .sum()
    }
}

/// Head-queue allocations forced in slot 0, served in class order so that together they never
/// exceed the slot capacity.
pub fn forced_head_allocations(banks: &[VirtualQueueBank], capacity: u64) -> Vec<u64> {
    let mut left = capacity;
    banks
        .iter()
        .map(|b| {
            let x = mandatory_first_allocation(b.get(1), left);
            left -= x;
            x
        })
        .collect()
}

pub(crate) fn check_dimensions(banks: &[VirtualQueueBank], specs: &[TrafficClassSpec]) -> Result<()> {
    if banks.len() != specs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} queue banks for {} classes",
            banks.len(),
            specs.len()
        )));
    }
    for (b, s) in banks.iter().zip(specs) {
        if b.k() != s.k_slots {
            return Err(Error::DimensionMismatch(format!(
                "class {} has {} virtual queues, bank has {}",
                s.id,
                s.k_slots,
                b.k()
            )));
        }
    }
    Ok(())
}

/// Builds the look-ahead allocation program.
///
/// Variables are ordered slot-major, then by class, then by queue. Queue bounds are expanded
/// through the state equations until they reach either an initial queue state or a predicted
/// arrival count, so every right-hand side is a constant. Rows come in the order: queue bounds
/// (slot-major), class budgets, slot budgets.
pub fn build_mpc_program(
    banks: &[VirtualQueueBank],
    specs: &[TrafficClassSpec],
    slot: &SlotConfig,
    predicted_arrivals: &[Vec<i64>],
) -> Result<LpInstance> {
    check_dimensions(banks, specs)?;
    let horizon = slot.horizon;
    if predicted_arrivals.len() != specs.len() {
        return Err(Error::DimensionMismatch(format!(
            "predictions for {} classes, expected {}",
            predicted_arrivals.len(),
            specs.len()
        )));
    }
    for p in predicted_arrivals {
        if p.len() != horizon {
            return Err(Error::DimensionMismatch(format!(
                "{} predicted slots for horizon {}",
                p.len(),
                horizon
            )));
        }
        if let Some(&neg) = p.iter().find(|&&a| a < 0) {
            return Err(Error::NegativeArrival(neg));
        }
    }

    let offsets: Vec<usize> = specs
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.k_slots;
            Some(o)
        })
        .collect();
    let per_slot: usize = specs.iter().map(|s| s.k_slots).sum();
    let var = |t: usize, c: usize, i: usize| t * per_slot + offsets[c] + (i - 1);
    let n = per_slot * (horizon + 1);

    let mut vars = vec![None; n];
    for t in 0..=horizon {
        for (c, s) in specs.iter().enumerate() {
            for i in 1..=s.k_slots {
                vars[var(t, c, i)] = Some(VarKey { class: c, queue: i, slot: t });
            }
        }
    }
    let mut objective = vec![1; n];
    for c in 0..specs.len() {
        objective[var(0, c, 1)] = 0;
    }

    let mut rows = Vec::new();
    for t in 0..=horizon {
        for (c, s) in specs.iter().enumerate() {
            let k = s.k_slots;
            for i in 1..=k {
                let mut terms = Vec::new();
                let mut j = i;
                loop {
                    terms.push((var(t - (j - i), c, j), 1));
                    if t == j - i || j == k {
                        break;
                    }
                    j += 1;
                }
                let back = j - i;
                let rhs = if back == t {
                    // Reached slot 0 at queue j.
                    banks[c].get(j) as i64
                } else {
                    // Reached the tail queue at slot t - back >= 1; it holds the arrivals of
                    // the slot before.
                    predicted_arrivals[c][t - back - 1]
                };
                rows.push(Row { terms, rhs, kind: RowKind::Queue { class: c, queue: i, slot: t } });
            }
        }
    }
    for (c, s) in specs.iter().enumerate() {
        let terms = (0..=horizon)
            .flat_map(|t| (1..=s.k_slots).map(move |i| (t, i)))
            .map(|(t, i)| (var(t, c, i), 1))
            .collect();
        rows.push(Row { terms, rhs: s.lambda_c_packets as i64, kind: RowKind::ClassBudget { class: c } });
    }
    for t in 0..=horizon {
        let terms = (0..per_slot).map(|o| (t * per_slot + o, 1)).collect();
        rows.push(Row { terms, rhs: slot.budget_packets as i64, kind: RowKind::SlotBudget { slot: t } });
    }

    let forced = forced_head_allocations(banks, slot.budget_packets);
    let fixed = forced.iter().enumerate().map(|(c, &x)| (var(0, c, 1), x)).collect();

    Ok(LpInstance { objective, rows, vars, fixed })
}

/// Solves the look-ahead program and returns the allocation matrix.
pub fn solve_mpc(
    banks: &[VirtualQueueBank],
    specs: &[TrafficClassSpec],
    slot: &SlotConfig,
    predicted_arrivals: &[Vec<i64>],
) -> Result<AllocationMatrix> {
    let inst = build_mpc_program(banks, specs, slot, predicted_arrivals)?;
    let sol = solve_lp(&inst)?;
    Ok(inst.to_allocation(&sol.values, specs, slot.horizon))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_matrix() -> Vec<Vec<i64>> {
        tu::tests::reference_matrix()
    }

    fn single(k: usize, lambda_c: u64) -> Vec<TrafficClassSpec> {
        vec![TrafficClassSpec::from_counts(1, k, lambda_c)]
    }

    #[test]
    fn three_queue_three_slot_matrix_matches_reference() {
        let banks = vec![VirtualQueueBank::from_counts(vec![1, 2, 3])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 3);
        let inst = build_mpc_program(&banks, &single(3, 40), &slot, &[vec![4, 5, 6]]).unwrap();
        assert_eq!(inst.matrix(), reference_matrix());
        // Right-hand sides: initial queues for the rows that stop at slot 0, arrivals for the
        // rows that stop at the tail queue.
        let rhs: Vec<i64> = inst.rows.iter().map(|r| r.rhs).collect();
        assert_eq!(rhs, vec![1, 2, 3, 2, 3, 4, 3, 4, 5, 4, 5, 6, 40, 50, 50, 50, 50]);
        assert_eq!(inst.fixed, vec![(0, 1)]);
    }

    #[test]
    fn myopic_program_has_queue_bounds_and_budget() {
        let banks = vec![VirtualQueueBank::from_counts(vec![5, 3, 2])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0).with_budget(6);
        let inst = build_mpc_program(&banks, &single(3, 100), &slot, &[vec![]]).unwrap();
        let res = inst.residual();
        assert_eq!(res.free, vec![1, 2]);
        let bounds: Vec<_> = res.rows.iter().filter(|(t, _)| t.len() == 1).map(|(t, b)| (t[0].0, *b)).collect();
        assert_eq!(bounds, vec![(0, 3), (1, 2)]);
        let budget = res.rows.iter().filter(|(t, _)| t.len() == 2).map(|(_, b)| *b).min().unwrap();
        assert_eq!(budget, 1);
    }

    #[test]
    fn empty_state_gives_zero_program() {
        let specs = vec![TrafficClassSpec::from_counts(1, 2, 10), TrafficClassSpec::from_counts(2, 3, 10)];
        let banks = vec![VirtualQueueBank::new(2), VirtualQueueBank::new(3)];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 2);
        let inst = build_mpc_program(&banks, &specs, &slot, &[vec![0, 0], vec![0, 0]]).unwrap();
        let sol = solve_lp(&inst).unwrap();
        assert_eq!(sol.objective, 0);
        assert!(sol.values.iter().all(|&v| v == 0));
    }

    #[test]
    fn build_rejects_bad_inputs() {
        let specs = single(2, 10);
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 2);
        let banks = vec![VirtualQueueBank::new(2)];
        assert!(matches!(
            build_mpc_program(&banks, &specs, &slot, &[vec![1]]),
            Err(Error::DimensionMismatch(_))
        ));
        assert_eq!(
            build_mpc_program(&banks, &specs, &slot, &[vec![1, -3]]),
            Err(Error::NegativeArrival(-3))
        );
        assert!(matches!(
            build_mpc_program(&[VirtualQueueBank::new(3)], &specs, &slot, &[vec![0, 0]]),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn forced_allocations_share_capacity_in_class_order() {
        let banks = vec![VirtualQueueBank::from_counts(vec![30]), VirtualQueueBank::from_counts(vec![30, 1])];
        assert_eq!(forced_head_allocations(&banks, 50), vec![30, 20]);
        assert_eq!(forced_head_allocations(&banks, 100), vec![30, 30]);
    }

    #[test]
    fn dump_lists_rows_and_fixings() {
        let banks = vec![VirtualQueueBank::from_counts(vec![1, 2])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 1);
        let inst = build_mpc_program(&banks, &single(2, 9), &slot, &[vec![3]]).unwrap();
        let text = inst.to_string();
        assert!(text.starts_with("max x[c0][q2][t0] + x[c0][q1][t1] + x[c0][q2][t1]\n"));
        assert!(text.contains("x[c0][q1][t1] + x[c0][q2][t0] <= 2"));
        assert!(text.ends_with("fix x[c0][q1][t0] = 1\n"));
    }
}
