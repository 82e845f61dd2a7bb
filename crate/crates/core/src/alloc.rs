//! Per-slot grant policies.
//!
//! Every allocator turns the ONU reports of one slot into a [`GrantSchedule`]. The MPC and
//! myopic allocators decide per-class, per-virtual-queue totals on the aggregate queue state and
//! split each total across ONUs with [`max_min_fair_distribute`]. The remaining allocators are
//! simplified behavioural models of common comparison schemes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opt::{solve_mpc, solve_myopic_maxflow, AllocationMatrix};
use crate::vq::{floor_ratio, SlotConfig, TrafficClassSpec, VirtualQueueBank};

/// Queue state of one ONU as seen by the scheduler at a slot boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnuReport {
    pub onu: usize,
    /// One bank per delay class, in class order.
    pub banks: Vec<VirtualQueueBank>,
    pub best_effort: u64,
}

impl OnuReport {
    pub fn class_backlog(&self, class: usize) -> u64 {
        self.banks[class].total()
    }
}

/// Packets granted to one ONU for the current slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OnuGrant {
    pub onu: usize,
    /// `queues[c][i - 1]`: packets granted from virtual queue `i` of class `c`.
    pub queues: Vec<Vec<u64>>,
    pub best_effort: u64,
}

impl OnuGrant {
    fn empty(report: &OnuReport) -> Self {
        OnuGrant {
            onu: report.onu,
            queues: report.banks.iter().map(|b| vec![0; b.k()]).collect(),
            best_effort: 0,
        }
    }

    pub fn class_total(&self, class: usize) -> u64 {
        self.queues[class].iter().sum()
    }

    pub fn total(&self) -> u64 {
        self.queues.iter().flatten().sum::<u64>() + self.best_effort
    }

    /// Delay-class grants in transmission order: most urgent virtual queue first, lower class
    /// first among queues of equal urgency. Yields `(class, queue, packets)`.
    pub fn urgency_order(&self) -> Vec<(usize, usize, u64)> {
        let depth = self.queues.iter().map(Vec::len).max().unwrap_or(0);
        let mut out = Vec::new();
        for i in 1..=depth {
            for (c, q) in self.queues.iter().enumerate() {
                if let Some(&x) = q.get(i - 1) {
                    if x > 0 {
                        out.push((c, i, x));
                    }
                }
            }
        }
        out
    }
}

/// Grants of one slot, one entry per reporting ONU. Bursts are transmitted in entry order,
/// which is ascending ONU id.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GrantSchedule {
    pub grants: Vec<OnuGrant>,
}

impl GrantSchedule {
    fn empty(reports: &[OnuReport]) -> Self {
        GrantSchedule { grants: reports.iter().map(OnuGrant::empty).collect() }
    }

    pub fn total(&self) -> u64 {
        self.grants.iter().map(OnuGrant::total).sum()
    }

    pub fn class_total(&self, class: usize) -> u64 {
        self.grants.iter().map(|g| g.class_total(class)).sum()
    }

    pub fn best_effort_total(&self) -> u64 {
        self.grants.iter().map(|g| g.best_effort).sum()
    }

    /// Checks the schedule against the slot budget and the reported backlogs.
    pub fn validate(&self, reports: &[OnuReport], budget: u64) -> Result<()> {
        if self.grants.len() != reports.len() {
            return Err(Error::InvalidGrant(format!("{} grants for {} reports", self.grants.len(), reports.len())));
        }
        if self.total() > budget {
            return Err(Error::InvalidGrant(format!("{} packets granted, budget {budget}", self.total())));
        }
        for (g, r) in self.grants.iter().zip(reports) {
            if g.onu != r.onu || g.queues.len() != r.banks.len() {
                return Err(Error::InvalidGrant(format!("grant for onu {} does not match its report", g.onu)));
            }
            for (c, (gq, bank)) in g.queues.iter().zip(&r.banks).enumerate() {
                for (i, &x) in gq.iter().enumerate() {
                    if x > bank.get(i + 1) {
                        return Err(Error::InvalidGrant(format!(
                            "onu {} class {c} queue {}: {x} granted, {} reported",
                            g.onu,
                            i + 1,
                            bank.get(i + 1)
                        )));
                    }
                }
            }
            if g.best_effort > r.best_effort {
                return Err(Error::InvalidGrant(format!(
                    "onu {} best effort: {} granted, {} reported",
                    g.onu, g.best_effort, r.best_effort
                )));
            }
        }
        Ok(())
    }
}

/// Splits `total` packets across `requests` by water-filling.
///
/// Each round divides what is left equally among the requests not yet satisfied, capping every
/// grant at its request. When less than one packet per open request remains, the leftover goes
/// one packet each to the lowest indices.
pub fn max_min_fair_distribute(total: u64, requests: &[u64]) -> Vec<u64> {
    let mut grants = vec![0u64; requests.len()];
    let mut left = total.min(requests.iter().sum());
    let mut open: Vec<usize> = (0..requests.len()).filter(|&k| requests[k] > 0).collect();
    while left > 0 && !open.is_empty() {
        let share = left / open.len() as u64;
        if share == 0 {
            for &k in open.iter().take(left as usize) {
                grants[k] += 1;
            }
            break;
        }
        for &k in &open {
            let give = share.min(requests[k] - grants[k]);
            grants[k] += give;
            left -= give;
        }
        open.retain(|&k| grants[k] < requests[k]);
    }
    grants
}

/// Sums the per-ONU banks of every class.
pub fn aggregate_banks(reports: &[OnuReport], specs: &[TrafficClassSpec]) -> Result<Vec<VirtualQueueBank>> {
    let mut agg: Vec<VirtualQueueBank> = specs.iter().map(|s| VirtualQueueBank::new(s.k_slots)).collect();
    for r in reports {
        if r.banks.len() != specs.len() {
            return Err(Error::DimensionMismatch(format!(
                "onu {} reports {} classes, expected {}",
                r.onu,
                r.banks.len(),
                specs.len()
            )));
        }
        for (a, b) in agg.iter_mut().zip(&r.banks) {
            if a.k() != b.k() {
                return Err(Error::DimensionMismatch(format!("onu {} bank has {} queues", r.onu, b.k())));
            }
            a.accumulate(b);
        }
    }
    Ok(agg)
}

/// Splits the slot-0 column of `alloc` across ONUs queue by queue, then hands what is left of
/// `budget` to best-effort traffic.
fn distribute_aggregate(reports: &[OnuReport], alloc: &AllocationMatrix, budget: u64) -> GrantSchedule {
    let mut sched = GrantSchedule::empty(reports);
    for (c, class) in alloc.x.iter().enumerate() {
        for (qi, row) in class.iter().enumerate() {
            let requests: Vec<u64> = reports.iter().map(|r| r.banks[c].get(qi + 1)).collect();
            for (g, x) in sched.grants.iter_mut().zip(max_min_fair_distribute(row[0], &requests)) {
                g.queues[c][qi] = x;
            }
        }
    }
    fill_best_effort(&mut sched, reports, budget);
    sched
}

fn fill_best_effort(sched: &mut GrantSchedule, reports: &[OnuReport], budget: u64) {
    let left = budget.saturating_sub(sched.total());
    let requests: Vec<u64> = reports.iter().map(|r| r.best_effort).collect();
    for (g, x) in sched.grants.iter_mut().zip(max_min_fair_distribute(left, &requests)) {
        g.best_effort += x;
    }
}

/// Remaining backlog of `class` at every ONU once the grants already in `sched` are served.
fn open_class_backlog(sched: &GrantSchedule, reports: &[OnuReport], class: usize) -> Vec<u64> {
    reports
        .iter()
        .zip(&sched.grants)
        .map(|(r, g)| r.class_backlog(class) - g.class_total(class))
        .collect()
}

/// Adds `extra` packets of `class` to one ONU grant, oldest virtual queue first.
fn grant_oldest_first(grant: &mut OnuGrant, bank: &VirtualQueueBank, class: usize, mut extra: u64) {
    for (qi, x) in grant.queues[class].iter_mut().enumerate() {
        if extra == 0 {
            break;
        }
        let take = extra.min(bank.get(qi + 1) - *x);
        *x += take;
        extra -= take;
    }
}

/// Grants up to `amount` packets of `class`, split max-min across ONUs by open backlog.
/// Returns the packets actually granted.
fn grant_class(sched: &mut GrantSchedule, reports: &[OnuReport], class: usize, amount: u64) -> u64 {
    let open = open_class_backlog(sched, reports, class);
    let shares = max_min_fair_distribute(amount, &open);
    for ((g, r), x) in sched.grants.iter_mut().zip(reports).zip(&shares) {
        grant_oldest_first(g, &r.banks[class], class, *x);
    }
    shares.iter().sum()
}

/// Look-ahead allocation: solves the allocation program on the aggregate queue state.
pub fn mpc_allocate(
    reports: &[OnuReport],
    specs: &[TrafficClassSpec],
    slot: &SlotConfig,
    predictions: &[Vec<i64>],
) -> Result<GrantSchedule> {
    let banks = aggregate_banks(reports, specs)?;
    let alloc = solve_mpc(&banks, specs, slot, predictions)?;
    Ok(distribute_aggregate(reports, &alloc, slot.budget_packets))
}

/// Allocation without look-ahead through the max-flow network. `specs` should carry the
/// single-slot contract budgets.
pub fn myopic_allocate(reports: &[OnuReport], specs: &[TrafficClassSpec], slot: &SlotConfig) -> Result<GrantSchedule> {
    let banks = aggregate_banks(reports, specs)?;
    let alloc = solve_myopic_maxflow(&banks, specs, slot)?;
    Ok(distribute_aggregate(reports, &alloc, slot.budget_packets))
}

/// Equal fixed share per ONU whatever its backlog. Inside its share an ONU sends its most
/// urgent packets first, then best-effort traffic. Unused share is lost.
pub fn fixed_tdm_allocate(reports: &[OnuReport], slot: &SlotConfig, n_onus: usize) -> GrantSchedule {
    let share = slot.budget_packets / n_onus.max(1) as u64;
    let mut sched = GrantSchedule::empty(reports);
    for (g, r) in sched.grants.iter_mut().zip(reports) {
        let mut left = share;
        let depth = r.banks.iter().map(VirtualQueueBank::k).max().unwrap_or(0);
        for i in 1..=depth {
            for (c, bank) in r.banks.iter().enumerate() {
                if i <= bank.k() {
                    let x = left.min(bank.get(i));
                    g.queues[c][i - 1] = x;
                    left -= x;
                }
            }
        }
        g.best_effort = left.min(r.best_effort);
    }
    sched
}

/// Packets per slot that the contract rate of `spec` amounts to.
pub fn assured_packets(spec: &TrafficClassSpec, slot: &SlotConfig) -> u64 {
    floor_ratio(spec.bandwidth_bps * slot.slot_s, slot.packet_bits)
}

/// Guarantees each class its contract rate, then serves leftover backlog by class priority and
/// finally best-effort traffic. Deadlines play no part beyond oldest-first service.
pub fn assured_allocate(reports: &[OnuReport], specs: &[TrafficClassSpec], slot: &SlotConfig) -> GrantSchedule {
    let mut sched = GrantSchedule::empty(reports);
    let mut left = slot.budget_packets;
    for (c, spec) in specs.iter().enumerate() {
        left -= grant_class(&mut sched, reports, c, assured_packets(spec, slot).min(left));
    }
    for c in 0..specs.len() {
        left -= grant_class(&mut sched, reports, c, left);
    }
    fill_best_effort(&mut sched, reports, slot.budget_packets);
    sched
}

/// Reserves a slice of the slot for delay classes served in strict priority order: the given
/// fraction of the budget, or by default the packets the class contracts add up to.
/// Best-effort traffic gets the rest of the slot plus whatever the slice leaves unused.
pub fn priority_allocate(
    reports: &[OnuReport],
    specs: &[TrafficClassSpec],
    slot: &SlotConfig,
    slice_fraction: Option<f64>,
) -> GrantSchedule {
    let mut sched = GrantSchedule::empty(reports);
    let mut slice = match slice_fraction {
        Some(f) => (f.clamp(0.0, 1.0) * slot.budget_packets as f64).floor() as u64,
        None => specs.iter().map(|s| assured_packets(s, slot)).sum::<u64>().min(slot.budget_packets),
    };
    for c in 0..specs.len() {
        slice -= grant_class(&mut sched, reports, c, slice);
    }
    fill_best_effort(&mut sched, reports, slot.budget_packets);
    sched
}

/// Couples the fog grant of each ONU (class 0) to its upstream window for the other traffic.
///
/// Windows are a max-min split of the slot by each ONU's non-fog backlog. The fog grant is
/// capped at `olt_window_fraction` of the window; the rest of the slot serves the other delay
/// classes in order and then best-effort traffic.
pub fn oob_allocate(reports: &[OnuReport], slot: &SlotConfig, olt_window_fraction: f64) -> GrantSchedule {
    let mut sched = GrantSchedule::empty(reports);
    let n_classes = reports.first().map_or(0, |r| r.banks.len());
    let olt: Vec<u64> = reports
        .iter()
        .map(|r| r.best_effort + (1..n_classes).map(|c| r.class_backlog(c)).sum::<u64>())
        .collect();
    let windows = max_min_fair_distribute(slot.budget_packets, &olt);
    let fraction = olt_window_fraction.clamp(0.0, 1.0);
    if n_classes > 0 {
        for ((g, r), w) in sched.grants.iter_mut().zip(reports).zip(&windows) {
            let cap = (fraction * *w as f64).floor() as u64;
            grant_oldest_first(g, &r.banks[0], 0, cap.min(r.class_backlog(0)));
        }
    }
    let mut left = slot.budget_packets - sched.total();
    for c in 1..n_classes {
        left -= grant_class(&mut sched, reports, c, left);
    }
    fill_best_effort(&mut sched, reports, slot.budget_packets);
    sched
}

/// Allocator chosen by name in a scenario, with its parameters. Deserializes from a bare name
/// or from a table with a `name` key and optional parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase", try_from = "AllocatorRepr")]
pub enum AllocatorKind {
    Mpc,
    Myopic,
    Fixed,
    Assured,
    Priority { slice_fraction: Option<f64> },
    Oob { olt_window_fraction: f64 },
}

pub const DEFAULT_OLT_WINDOW_FRACTION: f64 = 1.0;

impl AllocatorKind {
    pub const NAMES: [&'static str; 6] = ["mpc", "myopic", "fixed", "assured", "priority", "oob"];

    pub fn name(&self) -> &'static str {
        match self {
            AllocatorKind::Mpc => "mpc",
            AllocatorKind::Myopic => "myopic",
            AllocatorKind::Fixed => "fixed",
            AllocatorKind::Assured => "assured",
            AllocatorKind::Priority { .. } => "priority",
            AllocatorKind::Oob { .. } => "oob",
        }
    }

    /// Whether the allocator consumes arrival predictions.
    pub fn uses_predictions(&self) -> bool {
        matches!(self, AllocatorKind::Mpc)
    }

    /// Runs the policy. `predictions` is only read by the MPC allocator.
    pub fn allocate(
        &self,
        reports: &[OnuReport],
        specs: &[TrafficClassSpec],
        slot: &SlotConfig,
        predictions: &[Vec<i64>],
    ) -> Result<GrantSchedule> {
        Ok(match *self {
            AllocatorKind::Mpc => mpc_allocate(reports, specs, slot, predictions)?,
            AllocatorKind::Myopic => myopic_allocate(reports, specs, slot)?,
            AllocatorKind::Fixed => fixed_tdm_allocate(reports, slot, reports.len()),
            AllocatorKind::Assured => assured_allocate(reports, specs, slot),
            AllocatorKind::Priority { slice_fraction } => priority_allocate(reports, specs, slot, slice_fraction),
            AllocatorKind::Oob { olt_window_fraction } => oob_allocate(reports, slot, olt_window_fraction),
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AllocatorRepr {
    Name(String),
    Table {
        name: String,
        slice_fraction: Option<f64>,
        olt_window_fraction: Option<f64>,
    },
}

impl TryFrom<AllocatorRepr> for AllocatorKind {
    type Error = Error;

    fn try_from(repr: AllocatorRepr) -> Result<Self> {
        let (name, slice, window) = match repr {
            AllocatorRepr::Name(name) => (name, None, None),
            AllocatorRepr::Table { name, slice_fraction, olt_window_fraction } => {
                (name, slice_fraction, olt_window_fraction)
            }
        };
        let kind = match name.parse()? {
            AllocatorKind::Priority { .. } => AllocatorKind::Priority { slice_fraction: slice },
            AllocatorKind::Oob { olt_window_fraction } => {
                AllocatorKind::Oob { olt_window_fraction: window.unwrap_or(olt_window_fraction) }
            }
            other => other,
        };
        Ok(kind)
    }
}

impl FromStr for AllocatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mpc" => Ok(AllocatorKind::Mpc),
            "myopic" => Ok(AllocatorKind::Myopic),
            "fixed" => Ok(AllocatorKind::Fixed),
            "assured" => Ok(AllocatorKind::Assured),
            "priority" => Ok(AllocatorKind::Priority { slice_fraction: None }),
            "oob" => Ok(AllocatorKind::Oob { olt_window_fraction: DEFAULT_OLT_WINDOW_FRACTION }),
            other => Err(Error::UnknownAllocator(other.to_string())),
        }
    }
}

impl fmt::Display for AllocatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
