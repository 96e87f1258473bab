//! Per-flow enumeration of simple paths with in-order VNF assignments.

use std::time::Instant;

use crate::formulation::TOLERANCE;
use crate::model::{FlowSpec, Matrix, Network, NodeId};

/// Shared node and time budget for one solve.
#[derive(Debug)]
pub(crate) struct Budget {
    pub nodes: u64,
    limit: u64,
    deadline: Instant,
    pub exhausted: bool,
}

impl Budget {
    pub fn new(limit: u64, deadline: Instant) -> Self {
        Budget {
            nodes: 0,
            limit,
            deadline,
            exhausted: false,
        }
    }

    /// Count one search node; false once the budget is spent.
    pub fn tick(&mut self) -> bool {
        if self.exhausted {
            return false;
        }
        self.nodes += 1;
        if self.nodes > self.limit || (self.nodes % 512 == 0 && Instant::now() >= self.deadline) {
            self.exhausted = true;
        }
        !self.exhausted
    }
}

/// A simple s–d path together with the server of each chain element.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Candidate {
    pub path: Vec<NodeId>,
    pub service: Vec<usize>,
    /// Server node per chain element.
    pub servers: Vec<NodeId>,
    /// Distinct server nodes, ascending.
    pub used: Vec<NodeId>,
    /// (node, processing load) for the flow's own rate.
    pub loads: Vec<(NodeId, f64)>,
}

impl Candidate {
    pub fn hops(&self) -> usize {
        self.path.len() - 1
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.path.windows(2).map(|w| (w[0], w[1]))
    }

    pub fn lex_key(&self) -> (&[NodeId], &[NodeId]) {
        (&self.path, &self.servers)
    }
}

pub(crate) struct Limits<'a> {
    pub support: &'a Matrix<bool>,
    /// Remaining link room for this flow, indexed (i, j).
    pub link_room: &'a Matrix<f64>,
    /// Remaining processing room per server.
    pub server_room: &'a [f64],
    pub rate: f64,
    pub enforce_delay: bool,
}

/// All candidates of `flow` within `limits`. Stops early when the budget is
/// exhausted; the caller checks `budget.exhausted`.
pub(crate) fn enumerate(
    network: &Network,
    flow: &FlowSpec,
    limits: &Limits<'_>,
    budget: &mut Budget,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let n = network.node_count();
    let mut on_path = vec![false; n];
    let mut path = vec![flow.source];
    on_path[flow.source] = true;
    walk(network, flow, limits, budget, &mut path, &mut on_path, 0.0, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn walk(
    network: &Network,
    flow: &FlowSpec,
    limits: &Limits<'_>,
    budget: &mut Budget,
    path: &mut Vec<NodeId>,
    on_path: &mut [bool],
    delay: f64,
    out: &mut Vec<Candidate>,
) {
    if !budget.tick() {
        return;
    }
    let here = *path.last().unwrap();
    if here == flow.destination {
        assign(network, flow, limits, budget, path, out);
        return;
    }
    for &next in network.topology.successors(here) {
        if on_path[next] {
            continue;
        }
        if limits.link_room[(here, next)] + TOLERANCE < limits.rate {
            continue;
        }
        let d = delay + network.topology.delay(here, next).unwrap();
        if limits.enforce_delay && d > flow.delay_budget + TOLERANCE {
            continue;
        }
        on_path[next] = true;
        path.push(next);
        walk(network, flow, limits, budget, path, on_path, d, out);
        path.pop();
        on_path[next] = false;
        if budget.exhausted {
            return;
        }
    }
}

fn assign(
    network: &Network,
    flow: &FlowSpec,
    limits: &Limits<'_>,
    budget: &mut Budget,
    path: &[NodeId],
    out: &mut Vec<Candidate>,
) {
    let k = flow.chain.len();
    let mut service = Vec::with_capacity(k);
    let mut load = vec![0.0; path.len()];
    place(network, flow, limits, budget, path, 0, 0, &mut service, &mut load, out);
}

#[allow(clippy::too_many_arguments)]
fn place(
    network: &Network,
    flow: &FlowSpec,
    limits: &Limits<'_>,
    budget: &mut Budget,
    path: &[NodeId],
    k: usize,
    from: usize,
    service: &mut Vec<usize>,
    load: &mut [f64],
    out: &mut Vec<Candidate>,
) {
    if k == flow.chain.len() {
        let servers: Vec<NodeId> = service.iter().map(|&p| path[p]).collect();
        let mut used = servers.clone();
        used.sort_unstable();
        used.dedup();
        let loads = used
            .iter()
            .map(|&node| {
                let p = path.iter().position(|&v| v == node).unwrap();
                (node, load[p])
            })
            .collect();
        out.push(Candidate {
            path: path.to_vec(),
            service: service.clone(),
            servers,
            used,
            loads,
        });
        return;
    }
    let x = flow.chain[k];
    let need = limits.rate * network.vnfs.processing(x);
    for p in from..path.len() {
        let node = path[p];
        if !limits.support[(node, x)] {
            continue;
        }
        if load[p] + need > limits.server_room[node] + TOLERANCE {
            continue;
        }
        if !budget.tick() {
            return;
        }
        load[p] += need;
        service.push(p);
        place(network, flow, limits, budget, path, k + 1, p, service, load, out);
        service.pop();
        load[p] -= need;
        if budget.exhausted {
            return;
        }
    }
}
