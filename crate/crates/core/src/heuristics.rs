//! Greedy allocators: NSF for single arrivals, 3R as sequential exact
//! allocation, and the energy-aware ST-ENSF and LT-ENSF reallocators.
//!
//! Segments are shortest paths by propagation delay. Ties go to the lower
//! node index, both inside Dijkstra and between equally good servers.

use thiserror::Error;

use crate::exact::{solve_energy_sfra, settle_states, SolverConfig, SolverError};
use crate::formulation::TOLERANCE;
use crate::graph::dijkstra;
use crate::model::{
    Allocation, FlowRoute, FlowSpec, Horizon, Matrix, ModelError, Network, NetworkState, NodeId,
    PowerState, ProblemMode, VnfId,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeuristicError {
    #[error("no reachable server can provide VNF {vnf}")]
    NoProvider { vnf: VnfId },
    #[error("flow {flow}: no provider for chain element {index} (VNF {vnf})")]
    AllocationFailed { flow: usize, index: usize, vnf: VnfId },
    #[error("flow {flow}: destination unreachable")]
    Unreachable { flow: usize },
    #[error("flow {flow}: rate unknown")]
    RateUnknown { flow: usize },
    #[error("flow rate must be positive, got {0}")]
    BadRate(f64),
    #[error("flow {flow}: {source}")]
    Solver { flow: usize, source: SolverError },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A walk as consecutive simple segments between anchors.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedWalk {
    /// Segment k ends at the server of chain element k; the last one ends at d.
    pub segments: Vec<Vec<NodeId>>,
    /// VNF consumed at the end of each segment, `None` for the last.
    pub vnfs: Vec<Option<VnfId>>,
}

impl SegmentedWalk {
    pub fn anchors(&self) -> Vec<NodeId> {
        self.segments.iter().map(|s| *s.last().unwrap()).collect()
    }

    pub fn to_route(&self) -> Result<FlowRoute, ModelError> {
        FlowRoute::from_segments(&self.segments)
    }
}

/// Routes per flow (input order), resulting server states, failures and,
/// for LT-ENSF, the VNF types instantiated on newly activated servers.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicOutcome {
    pub allocation: Allocation,
    pub failures: Vec<HeuristicError>,
    pub placements: Vec<(NodeId, VnfId)>,
}

fn link_rooms(network: &Network, state: &NetworkState) -> Matrix<f64> {
    let n = network.node_count();
    let mut room = Matrix::new(n, n);
    for (i, j) in network.topology.links() {
        room[(i, j)] = state.link_residual(network, i, j);
    }
    room
}

fn server_rooms(network: &Network, state: &NetworkState) -> Vec<f64> {
    (0..network.node_count())
        .map(|i| state.server_residual(network, i))
        .collect()
}

fn empty_rooms(network: &Network, state: &NetworkState) -> (Matrix<f64>, Vec<f64>) {
    let n = network.node_count();
    let mut room = Matrix::new(n, n);
    for (i, j) in network.topology.links() {
        room[(i, j)] = state.caps.mu_l * network.topology.capacity(i, j);
    }
    let servers = network
        .servers
        .iter()
        .map(|s| state.caps.mu_s * s.capacity)
        .collect();
    (room, servers)
}

fn reduce(room: &mut Matrix<f64>, path: &[NodeId], rate: f64) {
    for w in path.windows(2) {
        room[(w[0], w[1])] -= rate;
    }
}

fn check_rate(rate: f64) -> Result<(), HeuristicError> {
    if rate > 0.0 && rate.is_finite() {
        Ok(())
    } else {
        Err(HeuristicError::BadRate(rate))
    }
}

fn nearest(
    network: &Network,
    link_room: &Matrix<f64>,
    server_room: &[f64],
    states: &[PowerState],
    current: NodeId,
    vnf: VnfId,
    rate: f64,
) -> Result<(NodeId, Vec<NodeId>), HeuristicError> {
    let sp = dijkstra(&network.topology, current, |i, j| link_room[(i, j)] + TOLERANCE >= rate);
    let need = rate * network.vnfs.processing(vnf);
    let mut best: Option<(f64, NodeId)> = None;
    for (v, srv) in network.servers.iter().enumerate() {
        if !srv.supports(vnf) || !states[v].is_on() || server_room[v] + TOLERANCE < need {
            continue;
        }
        let Some(c) = sp.cost(v) else { continue };
        if best.is_none_or(|(bc, _)| c < bc) {
            best = Some((c, v));
        }
    }
    let (_, v) = best.ok_or(HeuristicError::NoProvider { vnf })?;
    Ok((v, sp.path_to(v).unwrap()))
}

/// Nearest ON server, by path delay, that supports `vnf` and has room for
/// `stand_in_rate`. Links with less residual than the rate are ignored.
/// The returned path runs from `current` to the server, both included.
pub fn find_nearest_provider(
    network: &Network,
    state: &NetworkState,
    current: NodeId,
    vnf: VnfId,
    stand_in_rate: f64,
) -> Result<(NodeId, Vec<NodeId>), HeuristicError> {
    check_rate(stand_in_rate)?;
    nearest(
        network,
        &link_rooms(network, state),
        &server_rooms(network, state),
        &state.server_states,
        current,
        vnf,
        stand_in_rate,
    )
}

/// Chain nearest providers from the source, then take the shortest path to
/// the destination. Capacity is reserved at `mfs` per segment. Walks may
/// revisit nodes.
pub fn nsf(
    network: &Network,
    state: &NetworkState,
    flow: &FlowSpec,
    mfs: f64,
) -> Result<SegmentedWalk, HeuristicError> {
    check_rate(mfs)?;
    flow.validate(network.node_count(), network.vnf_count())?;
    let mut link_room = link_rooms(network, state);
    let mut server_room = server_rooms(network, state);
    let mut current = flow.source;
    let mut segments = Vec::with_capacity(flow.chain.len() + 1);
    let mut vnfs = Vec::with_capacity(flow.chain.len() + 1);
    for (index, &x) in flow.chain.iter().enumerate() {
        let (v, path) = nearest(network, &link_room, &server_room, &state.server_states, current, x, mfs)
            .map_err(|_| HeuristicError::AllocationFailed {
                flow: flow.id,
                index,
                vnf: x,
            })?;
        reduce(&mut link_room, &path, mfs);
        server_room[v] -= mfs * network.vnfs.processing(x);
        segments.push(path);
        vnfs.push(Some(x));
        current = v;
    }
    let sp = dijkstra(&network.topology, current, |i, j| link_room[(i, j)] + TOLERANCE >= mfs);
    let last = sp
        .path_to(flow.destination)
        .ok_or(HeuristicError::Unreachable { flow: flow.id })?;
    segments.push(last);
    vnfs.push(None);
    Ok(SegmentedWalk { segments, vnfs })
}

/// 3R: exact energy-aware allocation of each flow in turn, starting from
/// empty loads. Loads and servers used by earlier flows carry forward.
pub fn rrr(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    config: &SolverConfig,
) -> Result<HeuristicOutcome, HeuristicError> {
    let horizon = config.mode.horizon();
    let cfg = SolverConfig {
        mode: ProblemMode::EnergySfra(horizon),
        ..config.clone()
    };
    let original = state.server_states.clone();
    let mut used = vec![false; network.node_count()];
    let mut step = NetworkState {
        installed: Vec::new(),
        caps: state.caps,
        ..NetworkState::empty(network)
    };
    let mut routes = vec![None; flows.len()];
    let mut failures = Vec::new();
    for (k, flow) in flows.iter().enumerate() {
        let rate = flow.rate.ok_or(HeuristicError::RateUnknown { flow: flow.id })?;
        step.server_states = settle_states(&used, &original, horizon);
        let res = solve_energy_sfra(network, &step, flow, &cfg)
            .map_err(|source| HeuristicError::Solver { flow: flow.id, source })?;
        match res.allocation.routes.into_iter().next().flatten() {
            Some(route) => {
                step.add_route(network, flow, &route, rate);
                for (node, _) in route.assignment(&flow.chain) {
                    used[node] = true;
                }
                routes[k] = Some(route);
            }
            None => failures.push(HeuristicError::AllocationFailed {
                flow: flow.id,
                index: 0,
                vnf: flow.chain.first().copied().unwrap_or(0),
            }),
        }
    }
    Ok(HeuristicOutcome {
        allocation: Allocation {
            routes,
            server_states: settle_states(&used, &original, horizon),
        },
        failures,
        placements: Vec::new(),
    })
}

/// ST-ENSF: reallocate every flow among servers that are already ON,
/// preferring servers in use, then the IDLE server with least extra energy.
pub fn st_ensf(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
) -> Result<HeuristicOutcome, HeuristicError> {
    ensf(network, state, flows, Horizon::ShortTerm)
}

/// LT-ENSF: like ST-ENSF, but may fall back to the nearest OFF server,
/// switching it on and instantiating the VNF there within placement limits.
pub fn lt_ensf(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
) -> Result<HeuristicOutcome, HeuristicError> {
    ensf(network, state, flows, Horizon::LongTerm)
}

/// Apply LT-ENSF placements to the support matrix.
pub fn apply_placements(network: &mut Network, placements: &[(NodeId, VnfId)]) {
    for &(node, x) in placements {
        network.servers[node].supported[x] = true;
    }
}

struct Ens<'a> {
    network: &'a Network,
    horizon: Horizon,
    original: &'a [PowerState],
    active: Vec<bool>,
    supported: Vec<Vec<bool>>,
    placements: Vec<(NodeId, VnfId)>,
}

impl Ens<'_> {
    fn can_place(&self, v: NodeId, x: VnfId) -> bool {
        let Some(limits) = &self.network.placement else {
            return false;
        };
        let hosted = self.supported[v].iter().filter(|&&b| b).count();
        self.network.servers[v].is_present() && limits.eligible[v] && hosted < limits.max_types && !self.supported[v][x]
    }

    /// Rank of server `v` for `x` at path cost `cost`; lower is better.
    fn rank(&self, v: NodeId, x: VnfId, cost: f64) -> Option<(u8, f64, f64)> {
        let srv = &self.network.servers[v];
        let hosts = self.supported[v][x];
        if self.active[v] {
            return hosts.then_some((0, 0.0, cost));
        }
        let on = self.original[v].is_on();
        match self.horizon {
            Horizon::ShortTerm => (hosts && on).then(|| (1, self.horizon.energy_prime(srv), cost)),
            Horizon::LongTerm if on => hosts.then(|| (1, self.horizon.energy_prime(srv), cost)),
            Horizon::LongTerm => (hosts || self.can_place(v, x)).then_some((2, 0.0, cost)),
        }
    }
}

fn ensf(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    horizon: Horizon,
) -> Result<HeuristicOutcome, HeuristicError> {
    let n = network.node_count();
    let (mut link_room, mut server_room) = empty_rooms(network, state);
    let mut ens = Ens {
        network,
        horizon,
        original: &state.server_states,
        active: vec![false; n],
        supported: network.servers.iter().map(|s| s.supported.clone()).collect(),
        placements: Vec::new(),
    };
    let mut routes = vec![None; flows.len()];
    let mut failures = Vec::new();
    for (k, flow) in flows.iter().enumerate() {
        flow.validate(n, network.vnf_count())?;
        let rate = flow.rate.ok_or(HeuristicError::RateUnknown { flow: flow.id })?;
        check_rate(rate)?;
        // Work on copies; a failed flow releases what it reserved.
        let mut links = link_room.clone();
        let mut servers = server_room.clone();
        let mut visited = vec![false; n];
        visited[flow.source] = true;
        let mut current = flow.source;
        let mut segments = Vec::new();
        let mut picks: Vec<(NodeId, VnfId)> = Vec::new();
        let d = flow.destination;
        let mut failed = None;
        for (index, &x) in flow.chain.iter().enumerate() {
            let sp = dijkstra(&network.topology, current, |i, j| {
                i != d && !visited[j] && links[(i, j)] + TOLERANCE >= rate
            });
            let need = rate * network.vnfs.processing(x);
            let mut best: Option<((u8, f64, f64), NodeId)> = None;
            for v in 0..n {
                let Some(cost) = sp.cost(v) else { continue };
                if servers[v] + TOLERANCE < need {
                    continue;
                }
                if let Some(r) = ens.rank(v, x, cost) {
                    let better = best.is_none_or(|(b, _)| {
                        (r.0, r.1, r.2).partial_cmp(&(b.0, b.1, b.2)) == Some(std::cmp::Ordering::Less)
                    });
                    if better {
                        best = Some((r, v));
                    }
                }
            }
            let Some((_, v)) = best else {
                failed = Some(HeuristicError::AllocationFailed { flow: flow.id, index, vnf: x });
                break;
            };
            let path = sp.path_to(v).unwrap();
            reduce(&mut links, &path, rate);
            servers[v] -= need;
            for &u in &path {
                visited[u] = true;
            }
            picks.push((v, x));
            segments.push(path);
            current = v;
        }
        if failed.is_none() {
            let sp = dijkstra(&network.topology, current, |i, j| {
                i != d && !visited[j] && links[(i, j)] + TOLERANCE >= rate
            });
            match sp.path_to(d) {
                Some(path) => {
                    reduce(&mut links, &path, rate);
                    segments.push(path);
                }
                None => failed = Some(HeuristicError::Unreachable { flow: flow.id }),
            }
        }
        if let Some(e) = failed {
            failures.push(e);
            continue;
        }
        link_room = links;
        server_room = servers;
        for (v, x) in picks {
            ens.active[v] = true;
            if !ens.supported[v][x] {
                ens.supported[v][x] = true;
                ens.placements.push((v, x));
            }
        }
        routes[k] = Some(FlowRoute::from_segments(&segments)?);
    }
    Ok(HeuristicOutcome {
        allocation: Allocation {
            routes,
            server_states: settle_states(&ens.active, &state.server_states, horizon),
        },
        failures,
        placements: ens.placements,
    })
}
