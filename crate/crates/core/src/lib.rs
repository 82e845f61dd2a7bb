//! Virtual-queue model predictive bandwidth allocation for delay-constrained upstream traffic
//! on a polled passive optical network.

pub mod alloc;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod opt;
pub mod sim;
pub mod traffic;
pub mod vq;

pub use alloc::{AllocatorKind, GrantSchedule, OnuGrant, OnuReport};
pub use error::{Error, Result};
pub use metrics::{ClassMetrics, MetricsReport};
pub use sim::{run, Scenario, Simulation};
pub use traffic::ArrivalTrace;
pub use vq::{SlotConfig, TrafficClassSpec, VirtualQueueBank};
