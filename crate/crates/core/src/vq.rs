//! Slotted virtual-queue delay tracking.
//!
//! Every class `c` with deadline `d_c` is tracked by `K^c` virtual queues. Queue `i` holds the
//! packets that must leave within `i` slots, so fresh arrivals enter queue `K^c` and move one
//! queue closer to the head at every slot boundary. Whatever is still sitting in queue 1 when
//! the slot closes has missed its deadline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack applied before flooring ratios of physical quantities, so that products such as
/// `1e9 * 5e-4` that land a hair below an integer still floor to that integer.
const FLOOR_EPS: f64 = 1e-9;

pub(crate) fn floor_ratio(num: f64, den: f64) -> u64 {
    let q = num / den;
    if q <= 0.0 {
        0
    } else {
        (q + FLOOR_EPS).floor() as u64
    }
}

/// Number of virtual queues needed to honour `deadline_s` with slots of `slot_s`.
pub fn compute_k(deadline_s: f64, slot_s: f64) -> Result<usize> {
    if slot_s.is_nan() || slot_s <= 0.0 || deadline_s + FLOOR_EPS * slot_s < 2.0 * slot_s {
        return Err(Error::InfeasibleDeadline { deadline_s, slot_s });
    }
    Ok(floor_ratio(deadline_s - slot_s, slot_s) as usize)
}

/// Packets of `packet_bits` that a `link_bps` link clears in one slot.
pub fn compute_lambda(link_bps: f64, slot_s: f64, packet_bits: f64) -> u64 {
    floor_ratio(link_bps * slot_s, packet_bits)
}

/// The allocation that the head queue must receive in the current slot.
pub fn mandatory_first_allocation(q1: u64, lambda: u64) -> u64 {
    q1.min(lambda)
}

/// Slot timing and link capacity shared by every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotConfig {
    pub slot_s: f64,
    pub link_bps: f64,
    pub packet_bits: f64,
    /// Raw per-slot capacity, `floor(B * T_s / P_s)`.
    pub lambda_packets: u64,
    /// Capacity handed to the allocators. Equal to `lambda_packets` unless burst overheads
    /// were subtracted with [`SlotConfig::with_overheads`].
    pub budget_packets: u64,
    pub horizon: usize,
}

impl SlotConfig {
    pub fn new(link_bps: f64, slot_s: f64, packet_bits: f64, horizon: usize) -> Self {
        let lambda = compute_lambda(link_bps, slot_s, packet_bits);
        SlotConfig {
            slot_s,
            link_bps,
            packet_bits,
            lambda_packets: lambda,
            budget_packets: lambda,
            horizon,
        }
    }

    /// Replaces the allocator budget by the capacity left after guard intervals and control
    /// messages for `n_onus` bursts.
    pub fn with_overheads(mut self, n_onus: usize, guard_s: f64, control_bits: f64) -> Result<Self> {
        self.budget_packets = crate::sim::effective_lambda(&self, n_onus, guard_s, control_bits)?;
        Ok(self)
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_budget(mut self, budget_packets: u64) -> Self {
        self.budget_packets = budget_packets;
        self
    }

    /// Seconds needed to put one packet on the wire.
    pub fn packet_time_s(&self) -> f64 {
        self.packet_bits / self.link_bps
    }
}

/// A class of service: deadline, contracted bandwidth and the derived queue count and budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficClassSpec {
    pub id: usize,
    pub deadline_s: f64,
    pub bandwidth_bps: f64,
    pub k_slots: usize,
    /// Packets the contract allows over the `H + 1` slots of one optimisation window.
    pub lambda_c_packets: u64,
}

impl TrafficClassSpec {
    pub fn new(id: usize, deadline_s: f64, bandwidth_bps: f64, slot: &SlotConfig) -> Result<Self> {
        let k_slots = compute_k(deadline_s, slot.slot_s)?;
        let window_s = (slot.horizon as f64 + 1.0) * slot.slot_s;
        Ok(TrafficClassSpec {
            id,
            deadline_s,
            bandwidth_bps,
            k_slots,
            lambda_c_packets: floor_ratio(bandwidth_bps * window_s, slot.packet_bits),
        })
    }

    /// Builds a spec with explicit derived values; used by tests and the random instance
    /// generators that work directly in packet units.
    pub fn from_counts(id: usize, k_slots: usize, lambda_c_packets: u64) -> Self {
        TrafficClassSpec {
            id,
            deadline_s: f64::NAN,
            bandwidth_bps: f64::NAN,
            k_slots,
            lambda_c_packets,
        }
    }
}

/// Occupancy of the `K` virtual queues of one class. Index 0 is queue `Q_1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VirtualQueueBank {
    q: Vec<u64>,
}

impl VirtualQueueBank {
    pub fn new(k: usize) -> Self {
        assert!(k >= 1, "a class needs at least one virtual queue");
        VirtualQueueBank { q: vec![0; k] }
    }

    pub fn from_counts(q: Vec<u64>) -> Self {
        assert!(!q.is_empty(), "a class needs at least one virtual queue");
        VirtualQueueBank { q }
    }

    pub fn k(&self) -> usize {
        self.q.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.q
    }

    /// Occupancy of queue `i`, 1-based.
    pub fn get(&self, i: usize) -> u64 {
        self.q[i - 1]
    }

    pub fn total(&self) -> u64 {
        self.q.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.q.iter().all(|&v| v == 0)
    }

    /// Adds another bank of the same depth queue by queue.
    pub fn accumulate(&mut self, other: &VirtualQueueBank) {
        assert_eq!(self.k(), other.k());
        for (a, b) in self.q.iter_mut().zip(&other.q) {
            *a += b;
        }
    }

    /// Applies one slot of service and arrivals.
    ///
    /// `alloc[i]` is taken out of queue `i + 1`. Returns the next bank together with the
    /// number of head-queue packets that were left behind and therefore violated their
    /// deadline.
    pub fn advance_slot(&self, alloc: &[u64], arrivals: u64) -> Result<(VirtualQueueBank, u64)> {
        let k = self.k();
        if alloc.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "allocation has {} entries for {} queues",
                alloc.len(),
                k
            )));
        }
        for (i, (&x, &occ)) in alloc.iter().zip(&self.q).enumerate() {
            if x > occ {
                return Err(Error::AllocationExceedsQueue { queue: i + 1, alloc: x, occupancy: occ });
            }
        }
        let violated = self.q[0] - alloc[0];
        let mut next = vec![0; k];
        for i in 1..k {
            next[i - 1] = self.q[i] - alloc[i];
        }
        next[k - 1] = arrivals;
        Ok((VirtualQueueBank { q: next }, violated))
    }
}
