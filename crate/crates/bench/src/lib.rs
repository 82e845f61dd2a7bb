//! Shared fixtures for the benchmarks.

use pon_mpc::opt::random::{random_case, InstanceBounds, MpcCase};
use pon_mpc::{Scenario, SlotConfig, TrafficClassSpec, VirtualQueueBank};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Queue state of the two-class desk setup with a moderate backlog and look-ahead `horizon`.
pub fn desk_case(horizon: usize) -> MpcCase {
    let scenario = Scenario { horizon, ..Scenario::default() };
    let slot: SlotConfig = scenario.slot_config().unwrap();
    let specs: Vec<TrafficClassSpec> = scenario.class_specs().unwrap();
    let banks = specs
        .iter()
        .map(|s| VirtualQueueBank::from_counts((0..s.k_slots).map(|i| 4 + (i as u64 * 3) % 7).collect()))
        .collect();
    let predicted = specs.iter().map(|_| (0..horizon).map(|t| 6 + (t as i64 % 4)).collect()).collect();
    MpcCase { banks, specs, slot, predicted }
}

/// Random oracle-sized instances, as used by the equivalence checks.
pub fn oracle_cases(n: usize, horizon: Option<usize>) -> Vec<MpcCase> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    (0..n).map(|_| random_case(&mut rng, InstanceBounds::default(), horizon)).collect()
}
