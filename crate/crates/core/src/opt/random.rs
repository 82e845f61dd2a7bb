//! Random allocation programs and the cross-checks run on them.
//!
//! The suites compare independent solution routes on many small instances: the simplex
//! relaxation against exhaustive integer search, and the max-flow network against both. They
//! back the `oracle` command of the CLI and the acceptance tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::vq::{SlotConfig, TrafficClassSpec, VirtualQueueBank};

use super::{
    brute_force_ilp, build_mpc_program, check_totally_unimodular_ghouila_houri, reduce_by_unit_rows,
    solve_lp, solve_myopic_maxflow,
};

/// Size limits of generated instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct InstanceBounds {
    pub max_classes: usize,
    pub max_k: usize,
    pub max_horizon: usize,
    /// Upper bound for queue states, arrivals, `Λ` and `Λ^c`.
    pub max_value: u64,
}

impl Default for InstanceBounds {
    fn default() -> Self {
        InstanceBounds { max_classes: 3, max_k: 5, max_horizon: 4, max_value: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcCase {
    pub banks: Vec<VirtualQueueBank>,
    pub specs: Vec<TrafficClassSpec>,
    pub slot: SlotConfig,
    pub predicted: Vec<Vec<i64>>,
}

pub fn random_case<R: Rng>(rng: &mut R, bounds: InstanceBounds, horizon: Option<usize>) -> MpcCase {
    let n_classes = rng.random_range(1..=bounds.max_classes);
    let h = horizon.unwrap_or_else(|| rng.random_range(0..=bounds.max_horizon));
    let v = bounds.max_value;
    let mut specs = Vec::with_capacity(n_classes);
    let mut banks = Vec::with_capacity(n_classes);
    let mut predicted = Vec::with_capacity(n_classes);
    for c in 0..n_classes {
        let k = rng.random_range(1..=bounds.max_k);
        specs.push(TrafficClassSpec::from_counts(c + 1, k, rng.random_range(0..=v)));
        banks.push(VirtualQueueBank::from_counts((0..k).map(|_| rng.random_range(0..=v)).collect()));
        predicted.push((0..h).map(|_| rng.random_range(0..=v) as i64).collect());
    }
    let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, h).with_budget(rng.random_range(0..=v));
    MpcCase { banks, specs, slot, predicted }
}

/// Outcome of one cross-check suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Simplex optimum against exhaustive integer search on `cases` random instances.
pub fn lp_ilp_suite(cases: usize, seed: u64, bounds: InstanceBounds) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for n in 0..cases {
        let case = random_case(&mut rng, bounds, None);
        if let Err(msg) = compare_lp_ilp(&case) {
            failures.push(format!("case {n}: {msg}"));
        }
    }
    SuiteReport { name: "lp_vs_ilp".into(), cases, failures }
}

fn compare_lp_ilp(case: &MpcCase) -> std::result::Result<(), String> {
    let inst = build_mpc_program(&case.banks, &case.specs, &case.slot, &case.predicted).map_err(|e| e.to_string())?;
    // `solve_lp` fails unless every value is within the integrality tolerance.
    let lp = solve_lp(&inst).map_err(|e| format!("lp: {e}"))?;
    let ilp = brute_force_ilp(&inst).map_err(|e| format!("ilp: {e}"))?;
    if lp.objective != ilp {
        return Err(format!("lp objective {} != ilp objective {ilp}", lp.objective));
    }
    Ok(())
}

/// Max-flow, simplex and exhaustive search on random instances without look-ahead.
pub fn maxflow_suite(cases: usize, seed: u64, bounds: InstanceBounds) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures = Vec::new();
    for n in 0..cases {
        let case = random_case(&mut rng, bounds, Some(0));
        if let Err(msg) = compare_maxflow(&case) {
            failures.push(format!("case {n}: {msg}"));
        }
    }
    SuiteReport { name: "maxflow_vs_lp_vs_ilp".into(), cases, failures }
}

fn compare_maxflow(case: &MpcCase) -> std::result::Result<(), String> {
    let inst = build_mpc_program(&case.banks, &case.specs, &case.slot, &case.predicted).map_err(|e| e.to_string())?;
    let lp = solve_lp(&inst).map_err(|e| format!("lp: {e}"))?;
    let ilp = brute_force_ilp(&inst).map_err(|e| format!("ilp: {e}"))?;
    let flow = solve_myopic_maxflow(&case.banks, &case.specs, &case.slot).map_err(|e| format!("maxflow: {e}"))?;
    let flow_obj = flow.objective() as i64;
    if flow_obj != lp.objective || lp.objective != ilp {
        return Err(format!("maxflow {flow_obj}, lp {}, ilp {ilp}", lp.objective));
    }
    let flow_values: Vec<u64> = (0..case.specs.len()).flat_map(|c| flow.column(c, 0)).collect();
    if inst.check(&flow_values).is_err() {
        return Err("max-flow allocation violates the program".into());
    }
    Ok(())
}

/// Ghouila-Houri verdicts on the reduced single-class program matrices with `K, H <= 3`.
pub fn tu_suite() -> Result<SuiteReport> {
    let mut failures = Vec::new();
    let mut cases = 0;
    for k in 1..=3 {
        for h in 0..=3 {
            let banks = vec![VirtualQueueBank::new(k)];
            let specs = vec![TrafficClassSpec::from_counts(1, k, 1)];
            let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, h);
            let inst = build_mpc_program(&banks, &specs, &slot, &[vec![0; h]])?;
            let reduced = reduce_by_unit_rows(&inst.matrix());
            cases += 1;
            if !check_totally_unimodular_ghouila_houri(&reduced)? {
                failures.push(format!("K={k} H={h}: reduced program matrix is not TU"));
            }
        }
    }
    if check_totally_unimodular_ghouila_houri(&[vec![1, 1], vec![1, -1]])? {
        failures.push("[[1,1],[1,-1]] reported TU".into());
    }
    cases += 1;
    Ok(SuiteReport { name: "ghouila_houri".into(), cases, failures })
}
