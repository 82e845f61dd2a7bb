//! Per-run counters and the report derived from them.

use serde::{Deserialize, Serialize};

/// Running mean and population variance of packet delays (Welford's update).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub count: u64,
    mean: f64,
    m2: f64,
    pub max: f64,
}

impl DelayStats {
    pub fn push(&mut self, delay_s: f64) {
        self.count += 1;
        let d = delay_s - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (delay_s - self.mean);
        self.max = self.max.max(delay_s);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.mean
        }
    }

    pub fn population_variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }
}

/// Packet counters of one traffic class over a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassCounters {
    /// Every generated packet, admitted or not.
    pub offered: u64,
    pub served: u64,
    pub deadline_drops: u64,
    pub buffer_drops: u64,
    /// Served packets whose delay exceeded the class deadline.
    pub late: u64,
    pub delays: DelayStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    /// Class id; 0 for best-effort traffic.
    pub class: usize,
    pub offered: u64,
    pub served: u64,
    pub deadline_drops: u64,
    pub buffer_drops: u64,
    /// Packets still queued when the run ended.
    pub residual: u64,
    pub violation_pct: f64,
    pub mean_delay_s: f64,
    pub delay_variance_s2: f64,
    pub max_delay_s: f64,
    pub late_departures: u64,
}

impl ClassMetrics {
    pub fn from_counters(class: usize, c: &ClassCounters, residual: u64) -> Self {
        ClassMetrics {
            class,
            offered: c.offered,
            served: c.served,
            deadline_drops: c.deadline_drops,
            buffer_drops: c.buffer_drops,
            residual,
            violation_pct: if c.offered > 0 { 100.0 * c.deadline_drops as f64 / c.offered as f64 } else { 0.0 },
            mean_delay_s: c.delays.mean(),
            delay_variance_s2: c.delays.population_variance(),
            max_delay_s: c.delays.max,
            late_departures: c.late,
        }
    }

    /// `offered = served + deadline drops + buffer drops + residual`.
    pub fn is_conserved(&self) -> bool {
        self.offered == self.served + self.deadline_drops + self.buffer_drops + self.residual
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario_hash: String,
    pub seed: u64,
    pub allocator: String,
    pub slots: usize,
    /// What counts as busy link time in `throughput_pct`.
    pub throughput_basis: String,
    /// Which variance estimator `delay_variance_s2` uses.
    pub variance_estimator: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub classes: Vec<ClassMetrics>,
    pub best_effort: ClassMetrics,
    /// Payload transmission time as a percentage of the simulated time.
    pub throughput_pct: f64,
    /// Payload share of every slot.
    pub utilization: Vec<f64>,
    /// Longest time between two consecutive bursts of the same ONU.
    pub max_service_gap_s: f64,
    pub metadata: RunMetadata,
}

impl MetricsReport {
    pub fn is_conserved(&self) -> bool {
        self.classes.iter().all(ClassMetrics::is_conserved) && self.best_effort.is_conserved()
    }
}

/// Everything the simulator accumulates over a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunCounters {
    pub classes: Vec<ClassCounters>,
    pub best_effort: ClassCounters,
    pub payload_s: f64,
    pub utilization: Vec<f64>,
    pub max_service_gap_s: f64,
}

/// Builds the report once a run is complete. `residual` holds the packets still queued per
/// delay class followed by best-effort traffic.
pub fn finalize(
    counters: &RunCounters,
    class_ids: &[usize],
    residual: &[u64],
    total_time_s: f64,
    metadata: RunMetadata,
) -> MetricsReport {
    let classes = counters
        .classes
        .iter()
        .zip(class_ids)
        .zip(residual)
        .map(|((c, &id), &r)| ClassMetrics::from_counters(id, c, r))
        .collect();
    let be_residual = residual.get(class_ids.len()).copied().unwrap_or(0);
    MetricsReport {
        classes,
        best_effort: ClassMetrics::from_counters(0, &counters.best_effort, be_residual),
        throughput_pct: if total_time_s > 0.0 { (100.0 * counters.payload_s / total_time_s).min(100.0) } else { 0.0 },
        utilization: counters.utilization.clone(),
        max_service_gap_s: counters.max_service_gap_s,
        metadata,
    }
}
