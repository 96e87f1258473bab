//! Delay-weighted shortest paths on a pruned view of the topology.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::model::{NodeId, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cost(f64);

impl Eq for Cost {}

impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone)]
pub struct ShortestPaths {
    source: NodeId,
    dist: Vec<f64>,
    pred: Vec<Option<NodeId>>,
}

impl ShortestPaths {
    pub fn source(&self) -> NodeId {
        self.source
    }

    pub fn cost(&self, v: NodeId) -> Option<f64> {
        self.dist[v].is_finite().then_some(self.dist[v])
    }

    /// Node sequence from the source to `v`, both included.
    pub fn path_to(&self, v: NodeId) -> Option<Vec<NodeId>> {
        self.cost(v)?;
        let mut path = vec![v];
        let mut cur = v;
        while let Some(p) = self.pred[cur] {
            path.push(p);
            cur = p;
        }
        path.reverse();
        Some(path)
    }
}

/// Dijkstra by link delay from `source`, skipping links for which
/// `keep(i, j)` is false. Among equal-cost predecessors the lowest index wins.
pub fn dijkstra(
    topology: &Topology,
    source: NodeId,
    mut keep: impl FnMut(NodeId, NodeId) -> bool,
) -> ShortestPaths {
    let n = topology.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred: Vec<Option<NodeId>> = vec![None; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(Reverse((Cost(0.0), source)));
    while let Some(Reverse((Cost(d), u))) = heap.pop() {
        if done[u] || d > dist[u] {
            continue;
        }
        done[u] = true;
        for &v in topology.successors(u) {
            if done[v] || !keep(u, v) {
                continue;
            }
            let w = topology.delay(u, v).expect("successor has a delay");
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                pred[v] = Some(u);
                heap.push(Reverse((Cost(nd), v)));
            } else if nd == dist[v] && pred[v].is_some_and(|p| u < p) {
                pred[v] = Some(u);
            }
        }
    }
    ShortestPaths { source, dist, pred }
}
