use std::collections::BTreeSet;

use super::{FlowSpec, Matrix, ModelError, Network, NodeId, PowerState, Topology, VnfId};

/// A routed flow: the switch sequence plus, for each chain element, the walk
/// position of the server that delivers it.
///
/// Exact solutions are simple paths. Heuristic solutions may revisit
/// switches; each segment between consecutive anchors is still simple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowRoute {
    walk: Vec<NodeId>,
    service: Vec<usize>,
}

impl FlowRoute {
    pub fn new(walk: Vec<NodeId>, service: Vec<usize>) -> Result<Self, ModelError> {
        if walk.len() < 2 {
            return Err(ModelError::DimensionMismatch(
                "a walk needs at least two switches".into(),
            ));
        }
        if service.windows(2).any(|w| w[0] > w[1]) || service.iter().any(|&p| p >= walk.len()) {
            return Err(ModelError::DimensionMismatch(
                "service positions must be nondecreasing walk indices".into(),
            ));
        }
        Ok(FlowRoute { walk, service })
    }

    /// Concatenate segments; segment `k` ends at the server of chain element
    /// `k`, and the last segment ends at the destination.
    pub fn from_segments(segments: &[Vec<NodeId>]) -> Result<Self, ModelError> {
        let (last, served) = segments
            .split_last()
            .ok_or_else(|| ModelError::DimensionMismatch("no segments".into()))?;
        let mut walk: Vec<NodeId> = Vec::new();
        let mut service = Vec::with_capacity(served.len());
        for (k, seg) in segments.iter().enumerate() {
            let Some((&head, tail)) = seg.split_first() else {
                return Err(ModelError::DimensionMismatch(format!("segment {k} is empty")));
            };
            match walk.last() {
                None => walk.push(head),
                Some(&end) if end == head => {}
                Some(_) => {
                    return Err(ModelError::DimensionMismatch(format!(
                        "segment {k} does not start where the previous one ended"
                    )))
                }
            }
            walk.extend_from_slice(tail);
            if k < served.len() {
                service.push(walk.len() - 1);
            }
        }
        debug_assert_eq!(walk.last(), last.last());
        FlowRoute::new(walk, service)
    }

    pub fn walk(&self) -> &[NodeId] {
        &self.walk
    }

    pub fn service(&self) -> &[usize] {
        &self.service
    }

    pub fn source(&self) -> NodeId {
        self.walk[0]
    }

    pub fn destination(&self) -> NodeId {
        self.walk[self.walk.len() - 1]
    }

    pub fn hops(&self) -> usize {
        self.walk.len() - 1
    }

    /// Consecutive pairs, with repetition if the walk reuses a link.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.walk.windows(2).map(|w| (w[0], w[1]))
    }

    /// Distinct links; the support of the binary matrix R.
    pub fn edge_set(&self) -> BTreeSet<(NodeId, NodeId)> {
        self.edges().collect()
    }

    pub fn is_simple(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.walk.iter().all(|n| seen.insert(*n))
    }

    /// Anchor positions: source, each server in chain order, destination.
    pub fn anchors(&self) -> Vec<usize> {
        let mut a = Vec::with_capacity(self.service.len() + 2);
        a.push(0);
        a.extend_from_slice(&self.service);
        a.push(self.walk.len() - 1);
        a
    }

    /// Sub-walks between consecutive anchors. Single-switch segments mean two
    /// anchors share a switch.
    pub fn segments(&self) -> Vec<&[NodeId]> {
        self.anchors()
            .windows(2)
            .map(|w| &self.walk[w[0]..=w[1]])
            .collect()
    }

    /// (server node, VNF) pairs in chain order.
    pub fn assignment<'a>(&'a self, chain: &'a [VnfId]) -> impl Iterator<Item = (NodeId, VnfId)> + 'a {
        self.service
            .iter()
            .zip(chain)
            .map(move |(&p, &x)| (self.walk[p], x))
    }

    pub fn servers(&self) -> BTreeSet<NodeId> {
        self.service.iter().map(|&p| self.walk[p]).collect()
    }
}

/// |R − M| for one flow, where a missing route is the zero matrix.
pub fn route_difference(r: Option<&FlowRoute>, m: Option<&FlowRoute>) -> usize {
    let a = r.map(FlowRoute::edge_set).unwrap_or_default();
    let b = m.map(FlowRoute::edge_set).unwrap_or_default();
    a.symmetric_difference(&b).count()
}

/// Decode an ordered routing matrix into the visited switch sequence.
pub fn walk_from_q(q: &Matrix<u32>, s: NodeId, d: NodeId) -> Result<Vec<NodeId>, ModelError> {
    let n = q.rows();
    if q.cols() != n || s >= n || d >= n {
        return Err(ModelError::DimensionMismatch("Q must be N×N with s, d < N".into()));
    }
    let mut steps: Vec<(u32, NodeId, NodeId)> = q
        .iter()
        .filter(|&((i, j), &v)| v > 0 && (i, j) != (d, d))
        .map(|((i, j), &v)| (v, i, j))
        .collect();
    steps.sort_unstable();
    let mut walk = vec![s];
    for (k, &(v, i, j)) in steps.iter().enumerate() {
        let expected = k as u32 + 1;
        if v != expected {
            return Err(ModelError::MalformedQ(if v < expected {
                format!("step {v} used more than once")
            } else {
                format!("step {expected} missing")
            }));
        }
        if i != *walk.last().unwrap() {
            return Err(ModelError::MalformedQ(format!(
                "step {v} leaves node {} but the walk is at node {}",
                i + 1,
                walk.last().unwrap() + 1
            )));
        }
        if i == j {
            return Err(ModelError::MalformedQ(format!("self entry at node {}", i + 1)));
        }
        walk.push(j);
    }
    if *walk.last().unwrap() != d {
        return Err(ModelError::MalformedQ(format!(
            "walk ends at node {} instead of the destination",
            walk.last().unwrap() + 1
        )));
    }
    if q[(d, d)] as usize != walk.len() {
        return Err(ModelError::MalformedQ(format!(
            "destination register holds {} for a walk of {} switches",
            q[(d, d)],
            walk.len()
        )));
    }
    Ok(walk)
}

/// Encode a simple walk as (R, Q).
pub fn routing_from_walk(
    walk: &[NodeId],
    topology: &Topology,
) -> Result<(Matrix<u8>, Matrix<u32>), ModelError> {
    let n = topology.node_count();
    if walk.len() < 2 {
        return Err(ModelError::DimensionMismatch("a walk needs at least two switches".into()));
    }
    let mut seen = vec![false; n];
    for &v in walk {
        if v >= n {
            return Err(ModelError::DimensionMismatch(format!("node {} outside topology", v + 1)));
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(ModelError::NotSimple(v));
        }
    }
    let mut r = Matrix::new(n, n);
    let mut q = Matrix::new(n, n);
    for (k, w) in walk.windows(2).enumerate() {
        if !topology.has_link(w[0], w[1]) {
            return Err(ModelError::NotALink { from: w[0], to: w[1] });
        }
        r[(w[0], w[1])] = 1;
        q[(w[0], w[1])] = k as u32 + 1;
    }
    let d = walk[walk.len() - 1];
    q[(d, d)] = walk.len() as u32;
    Ok((r, q))
}

/// Matrix form of one flow's decision variables.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowMatrices {
    pub r: Matrix<u8>,
    pub q: Matrix<u32>,
    pub u: Matrix<u8>,
}

impl FlowMatrices {
    pub fn zeros(n: usize, vnf_count: usize) -> Self {
        FlowMatrices {
            r: Matrix::new(n, n),
            q: Matrix::new(n, n),
            u: Matrix::new(n, vnf_count),
        }
    }

    /// Q stays zero when the walk repeats a switch; such flows are checked
    /// through their segments instead.
    pub fn from_route(network: &Network, flow: &FlowSpec, route: &FlowRoute) -> Result<Self, ModelError> {
        let n = network.node_count();
        let mut m = FlowMatrices::zeros(n, network.vnf_count());
        if route.service().len() != flow.chain.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "flow {} has {} chain entries but {} service positions",
                flow.id,
                flow.chain.len(),
                route.service().len()
            )));
        }
        if route.is_simple() {
            let (r, q) = routing_from_walk(route.walk(), &network.topology)?;
            m.r = r;
            m.q = q;
        } else {
            for (i, j) in route.edges() {
                if !network.topology.has_link(i, j) {
                    return Err(ModelError::NotALink { from: i, to: j });
                }
                m.r[(i, j)] = 1;
            }
        }
        for (node, x) in route.assignment(&flow.chain) {
            m.u[(node, x)] = 1;
        }
        Ok(m)
    }
}

/// Decision variables for a set of flows plus the next server-state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingSolution {
    pub flows: Vec<FlowMatrices>,
    /// Walks behind the matrices, when known. Needed for walk-mode checks.
    pub routes: Vec<Option<FlowRoute>>,
    pub next_state: Vec<bool>,
}

impl RoutingSolution {
    pub fn from_routes(
        network: &Network,
        flows: &[FlowSpec],
        routes: &[FlowRoute],
        next_state: Vec<bool>,
    ) -> Result<Self, ModelError> {
        if routes.len() != flows.len() {
            return Err(ModelError::DimensionMismatch("one route per flow required".into()));
        }
        let matrices = flows
            .iter()
            .zip(routes)
            .map(|(f, r)| FlowMatrices::from_route(network, f, r))
            .collect::<Result<_, _>>()?;
        Ok(RoutingSolution {
            flows: matrices,
            routes: routes.iter().cloned().map(Some).collect(),
            next_state,
        })
    }

    /// The set of servers delivering any VNF.
    pub fn used_servers(&self, n: usize) -> Vec<bool> {
        let mut used = vec![false; n];
        for m in &self.flows {
            for ((i, _), &v) in m.u.iter() {
                if v > 0 {
                    used[i] = true;
                }
            }
        }
        used
    }
}

/// Result of any allocator: a route per flow (`None` = not carried) and
/// the server states after the decision.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation {
    pub routes: Vec<Option<FlowRoute>>,
    pub server_states: Vec<PowerState>,
}

impl Allocation {
    pub fn accepted(&self) -> Vec<usize> {
        (0..self.routes.len()).filter(|&f| self.routes[f].is_some()).collect()
    }

    pub fn rejected_count(&self) -> usize {
        self.routes.iter().filter(|r| r.is_none()).count()
    }

    /// Accepted flows and their matrix form. O^t marks ACTIVE servers.
    pub fn to_solution(
        &self,
        network: &Network,
        flows: &[FlowSpec],
    ) -> Result<(Vec<FlowSpec>, RoutingSolution), ModelError> {
        if self.routes.len() != flows.len() {
            return Err(ModelError::DimensionMismatch("one route slot per flow required".into()));
        }
        let kept = self.accepted();
        let sub: Vec<FlowSpec> = kept.iter().map(|&f| flows[f].clone()).collect();
        let routes: Vec<FlowRoute> = kept
            .iter()
            .map(|&f| self.routes[f].clone().unwrap())
            .collect();
        let next = self
            .server_states
            .iter()
            .map(|&s| s == PowerState::Active)
            .collect();
        let sol = RoutingSolution::from_routes(network, &sub, &routes, next)?;
        Ok((sub, sol))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Topology {
        let mut t = Topology::new(n);
        for i in 0..n - 1 {
            t.add_bidirectional(i, i + 1, 1.0, 1.0).unwrap();
        }
        t
    }

    #[test]
    fn segments_split_at_anchors() {
        let r = FlowRoute::from_segments(&[vec![0], vec![0, 1, 3], vec![3, 1]]).unwrap();
        assert_eq!(r.walk(), &[0, 1, 3, 1]);
        assert_eq!(r.service(), &[0, 2]);
        assert_eq!(r.segments(), vec![&[0][..], &[0, 1, 3][..], &[3, 1][..]]);
        assert!(!r.is_simple());
        assert_eq!(r.hops(), 3);
    }

    #[test]
    fn from_segments_rejects_gaps() {
        assert!(FlowRoute::from_segments(&[vec![0, 1], vec![2, 3]]).is_err());
    }

    #[test]
    fn round_trip_on_line() {
        let t = line(4);
        let (r, q) = routing_from_walk(&[0, 1, 2, 3], &t).unwrap();
        assert_eq!(r.as_slice().iter().map(|&v| v as u32).sum::<u32>(), 3);
        assert_eq!(q[(3, 3)], 4);
        assert_eq!(walk_from_q(&q, 0, 3).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn repeated_node_cannot_be_encoded() {
        let t = line(3);
        assert_eq!(
            routing_from_walk(&[0, 1, 0, 1, 2], &t),
            Err(ModelError::NotSimple(0))
        );
    }

    #[test]
    fn missing_step_is_malformed() {
        let mut q = Matrix::new(3, 3);
        q[(0, 1)] = 1;
        q[(1, 2)] = 3;
        q[(2, 2)] = 3;
        assert!(matches!(walk_from_q(&q, 0, 2), Err(ModelError::MalformedQ(_))));
    }

    #[test]
    fn difference_counts_changed_entries() {
        let a = FlowRoute::new(vec![0, 1, 2], vec![]).unwrap();
        let b = FlowRoute::new(vec![0, 2], vec![]).unwrap();
        assert_eq!(route_difference(Some(&a), Some(&b)), 3);
        assert_eq!(route_difference(Some(&a), None), 2);
        assert_eq!(route_difference(Some(&a), Some(&a)), 0);
    }
}
