//! Dinic's blocking-flow max-flow and the myopic allocation network.

use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};
use crate::vq::{SlotConfig, TrafficClassSpec, VirtualQueueBank};

use super::{check_dimensions, forced_head_allocations, AllocationMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowEdge {
    pub from: usize,
    pub to: usize,
    pub cap: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowNetwork {
    pub labels: Vec<String>,
    pub edges: Vec<FlowEdge>,
    pub source: usize,
    pub sink: usize,
}

impl FlowNetwork {
    /// A network holding only its source and sink.
    pub fn new() -> Self {
        FlowNetwork { labels: vec!["S".into(), "T".into()], edges: Vec::new(), source: 0, sink: 1 }
    }

    pub fn add_node(&mut self, label: impl Into<String>) -> usize {
        self.labels.push(label.into());
        self.labels.len() - 1
    }

    /// Adds a directed edge and returns its index.
    pub fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> usize {
        assert!(from < self.labels.len() && to < self.labels.len(), "edge endpoint out of range");
        assert!(to != self.source && from != self.sink, "source in-edge or sink out-edge");
        self.edges.push(FlowEdge { from, to, cap });
        self.edges.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.len()
    }
}

impl Default for FlowNetwork {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for FlowNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.edges.iter().enumerate() {
            writeln!(f, "e{k:<3} {} -> {} cap {}", self.labels[e.from], self.labels[e.to], e.cap)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowResult {
    pub value: u64,
    /// Flow on every edge, indexed like `FlowNetwork::edges`.
    pub flows: Vec<u64>,
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<u64>,
    adj: Vec<Vec<usize>>,
}

impl Residual {
    fn build(net: &FlowNetwork) -> Self {
        let mut r = Residual {
            head: Vec::with_capacity(2 * net.edges.len()),
            cap: Vec::with_capacity(2 * net.edges.len()),
            adj: vec![Vec::new(); net.n_nodes()],
        };
        for e in &net.edges {
            r.adj[e.from].push(r.head.len());
            r.head.push(e.to);
            r.cap.push(e.cap);
            r.adj[e.to].push(r.head.len());
            r.head.push(e.from);
            r.cap.push(0);
        }
        r
    }

    fn levels(&self, s: usize) -> Vec<usize> {
        let mut level = vec![usize::MAX; self.adj.len()];
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.head[a];
                if self.cap[a] > 0 && level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, limit: u64, level: &[usize], next: &mut [usize]) -> u64 {
        if u == t {
            return limit;
        }
        while next[u] < self.adj[u].len() {
            let a = self.adj[u][next[u]];
            let v = self.head[a];
            if self.cap[a] > 0 && level[v] == level[u] + 1 {
                let got = self.push(v, t, limit.min(self.cap[a]), level, next);
                if got > 0 {
                    self.cap[a] -= got;
                    self.cap[a ^ 1] += got;
                    return got;
                }
            }
            next[u] += 1;
        }
        0
    }
}

/// Maximum source-to-sink flow.
///
/// Edges are explored in insertion order, so among maximum flows the one saturating earlier
/// edges first is returned and results are reproducible.
pub fn max_flow(net: &FlowNetwork) -> FlowResult {
    let mut res = Residual::build(net);
    let (s, t) = (net.source, net.sink);
    let mut value = 0u64;
    loop {
        let level = res.levels(s);
        if level[t] == usize::MAX {
            break;
        }
        let mut next = vec![0; net.n_nodes()];
        loop {
            let got = res.push(s, t, u64::MAX, &level, &mut next);
            if got == 0 {
                break;
            }
            value += got;
        }
    }
    let flows = (0..net.edges.len()).map(|k| res.cap[2 * k + 1]).collect();
    FlowResult { value, flows }
}

/// Source side of the minimum cut read off the residual graph of `flow`, and the cut capacity.
pub fn min_cut(net: &FlowNetwork, flow: &FlowResult) -> (Vec<bool>, u64) {
    let mut reach = vec![false; net.n_nodes()];
    reach[net.source] = true;
    let mut stack = vec![net.source];
    while let Some(u) = stack.pop() {
        for (k, e) in net.edges.iter().enumerate() {
            let (v, room) = if e.from == u {
                (e.to, e.cap - flow.flows[k])
            } else if e.to == u {
                (e.from, flow.flows[k])
            } else {
                continue;
            };
            if room > 0 && !reach[v] {
                reach[v] = true;
                stack.push(v);
            }
        }
    }
    let cap = net
        .edges
        .iter()
        .filter(|e| reach[e.from] && !reach[e.to])
        .map(|e| e.cap)
        .sum();
    (reach, cap)
}

/// Edge indices of the myopic network: `queues[c][i - 2]` carries the allocation of queue `i`.
pub(crate) struct MyopicNetwork {
    pub net: FlowNetwork,
    pub queues: Vec<Vec<usize>>,
    pub forced: Vec<u64>,
}

pub(crate) fn build_myopic_network(
    banks: &[VirtualQueueBank],
    specs: &[TrafficClassSpec],
    slot: &SlotConfig,
) -> Result<MyopicNetwork> {
    check_dimensions(banks, specs)?;
    let lambda = slot.budget_packets;
    let forced = forced_head_allocations(banks, lambda);
    let forced_total: u64 = forced.iter().sum();
    if forced_total > lambda {
        return Err(Error::NegativeBudget { forced: forced_total, capacity: lambda });
    }

    let mut net = FlowNetwork::new();
    let t2 = net.add_node("T2");
    let mut queues = Vec::with_capacity(specs.len());
    for (c, (bank, spec)) in banks.iter().zip(specs).enumerate() {
        let sc = net.add_node(format!("S{c}"));
        let t1 = net.add_node(format!("T1_{c}"));
        let tail: u64 = (2..=bank.k()).map(|i| bank.get(i)).sum();
        net.add_edge(net.source, sc, tail);
        queues.push((2..=bank.k()).map(|i| net.add_edge(sc, t1, bank.get(i))).collect());
        let budget = lambda.min(spec.lambda_c_packets).saturating_sub(forced[c]);
        net.add_edge(t1, t2, budget);
    }
    net.add_edge(t2, net.sink, lambda - forced_total);
    Ok(MyopicNetwork { net, queues, forced })
}

/// Allocation without look-ahead, solved as a max-flow problem. Only column `t = 0` is filled.
pub fn solve_myopic_maxflow(
    banks: &[VirtualQueueBank],
    specs: &[TrafficClassSpec],
    slot: &SlotConfig,
) -> Result<AllocationMatrix> {
    let m = build_myopic_network(banks, specs, slot)?;
    let flow = max_flow(&m.net);
    let mut alloc = AllocationMatrix::zeros(specs, 0);
    for (c, edges) in m.queues.iter().enumerate() {
        alloc.x[c][0][0] = m.forced[c];
        for (k, &e) in edges.iter().enumerate() {
            alloc.x[c][k + 1][0] = flow.flows[e];
        }
    }
    Ok(alloc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conserved(net: &FlowNetwork, flow: &FlowResult) -> bool {
        let mut bal = vec![0i128; net.n_nodes()];
        for (e, &f) in net.edges.iter().zip(&flow.flows) {
            if f > e.cap {
                return false;
            }
            bal[e.from] -= f as i128;
            bal[e.to] += f as i128;
        }
        (0..net.n_nodes()).all(|v| v == net.source || v == net.sink || bal[v] == 0)
            && bal[net.sink] == flow.value as i128
    }

    #[test]
    fn single_edge() {
        let mut net = FlowNetwork::new();
        net.add_edge(0, 1, 7);
        assert_eq!(max_flow(&net).value, 7);
    }

    /// Minimum capacity over every S/T cut, by enumerating the side of each inner node.
    fn enumerated_min_cut(net: &FlowNetwork) -> u64 {
        let inner = net.n_nodes() - 2;
        (0..1u32 << inner)
            .map(|mask| {
                let side: Vec<bool> = (0..net.n_nodes())
                    .map(|v| v == net.source || (v >= 2 && mask >> (v - 2) & 1 == 1))
                    .collect();
                net.edges.iter().filter(|e| side[e.from] && !side[e.to]).map(|e| e.cap).sum()
            })
            .min()
            .unwrap()
    }

    fn diamond(crossing: Option<u64>) -> FlowNetwork {
        let mut net = FlowNetwork::new();
        let a = net.add_node("a");
        let b = net.add_node("b");
        net.add_edge(0, a, 3);
        net.add_edge(a, 1, 2);
        net.add_edge(0, b, 2);
        net.add_edge(b, 1, 3);
        if let Some(c) = crossing {
            net.add_edge(a, b, c);
        }
        net
    }

    #[test]
    fn plain_diamond_matches_cut_enumeration() {
        let net = diamond(None);
        let flow = max_flow(&net);
        assert_eq!(flow.value, enumerated_min_cut(&net));
        assert_eq!(flow.value, 4);
        assert!(conserved(&net, &flow));
        assert_eq!(min_cut(&net, &flow).1, flow.value);
    }

    #[test]
    fn diamond_with_crossing_edge_reaches_five() {
        // The upper path's spare unit reaches T through b.
        let net = diamond(Some(1));
        let flow = max_flow(&net);
        assert_eq!(enumerated_min_cut(&net), 5);
        assert_eq!(flow.value, 5);
        assert!(conserved(&net, &flow));
        assert_eq!(min_cut(&net, &flow).1, 5);
    }

    #[test]
    fn zero_capacity_network() {
        let mut net = FlowNetwork::new();
        let a = net.add_node("a");
        net.add_edge(0, a, 0);
        net.add_edge(a, 1, 5);
        assert_eq!(max_flow(&net), FlowResult { value: 0, flows: vec![0, 0] });
    }

    #[test]
    fn fig4_example() {
        let specs = vec![TrafficClassSpec::from_counts(1, 3, 100)];
        let banks = vec![VirtualQueueBank::from_counts(vec![5, 3, 2])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0).with_budget(6);
        let alloc = solve_myopic_maxflow(&banks, &specs, &slot).unwrap();
        assert_eq!(alloc.column(0, 0), vec![5, 1, 0]);
        assert_eq!(alloc.objective(), 1);
    }

    #[test]
    fn single_queue_classes_are_all_forced() {
        let specs = vec![TrafficClassSpec::from_counts(1, 1, 50), TrafficClassSpec::from_counts(2, 1, 50)];
        let banks = vec![VirtualQueueBank::from_counts(vec![4]), VirtualQueueBank::from_counts(vec![9])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0);
        let alloc = solve_myopic_maxflow(&banks, &specs, &slot).unwrap();
        assert_eq!(alloc.objective(), 0);
        assert_eq!((alloc.get(0, 1, 0), alloc.get(1, 1, 0)), (4, 9));
    }

    #[test]
    fn class_budget_limits_flow() {
        let specs = vec![TrafficClassSpec::from_counts(1, 2, 3)];
        let banks = vec![VirtualQueueBank::from_counts(vec![0, 9])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0).with_budget(5);
        let alloc = solve_myopic_maxflow(&banks, &specs, &slot).unwrap();
        assert_eq!(alloc.column(0, 0), vec![0, 3]);
    }

    #[test]
    fn dump_lists_edges() {
        let specs = vec![TrafficClassSpec::from_counts(1, 2, 3)];
        let banks = vec![VirtualQueueBank::from_counts(vec![1, 9])];
        let slot = SlotConfig::new(1e9, 0.5e-3, 10_000.0, 0).with_budget(5);
        let m = build_myopic_network(&banks, &specs, &slot).unwrap();
        assert_eq!(
            m.net.to_string(),
            "e0   S -> S0 cap 9\ne1   S0 -> T1_0 cap 9\ne2   T1_0 -> T2 cap 2\ne3   T2 -> T cap 4\n"
        );
    }
}
