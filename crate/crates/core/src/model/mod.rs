//! Network, flow and solution types.
//!
//! Node and VNF indices are 0-based in memory. The text formats in
//! [`crate::io`] are 1-based.

mod matrix;
mod metrics;
mod route;

pub use matrix::Matrix;
pub use metrics::{compute_metrics, MetricsReport};
pub use route::{
    route_difference, routing_from_walk, walk_from_q, Allocation, FlowMatrices, FlowRoute,
    RoutingSolution,
};

use thiserror::Error;

pub type NodeId = usize;
pub type VnfId = usize;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("no link from node {} to node {}", .from + 1, .to + 1)]
    NotALink { from: NodeId, to: NodeId },
    #[error("walk revisits node {}; Q cannot encode it", .0 + 1)]
    NotSimple(NodeId),
    #[error("malformed Q matrix: {0}")]
    MalformedQ(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("invalid flow {flow}: {reason}")]
    InvalidFlow { flow: usize, reason: String },
    #[error("invalid server at node {}: {reason}", .node + 1)]
    InvalidServer { node: NodeId, reason: String },
}

/// Switch graph. Links are directed entries; the networks used here store each
/// undirected link as two of them.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    capacity: Matrix<f64>,
    delay: Matrix<Option<f64>>,
    out: Vec<Vec<NodeId>>,
    inc: Vec<Vec<NodeId>>,
}

impl Topology {
    pub fn new(n: usize) -> Self {
        Topology {
            capacity: Matrix::new(n, n),
            delay: Matrix::filled(n, n, None),
            out: vec![Vec::new(); n],
            inc: vec![Vec::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn add_link(
        &mut self,
        from: NodeId,
        to: NodeId,
        capacity: f64,
        delay: f64,
    ) -> Result<(), ModelError> {
        let n = self.node_count();
        if from >= n || to >= n {
            return Err(ModelError::InvalidTopology(format!(
                "link {}-{} outside 1..={n}",
                from + 1,
                to + 1
            )));
        }
        if from == to {
            return Err(ModelError::InvalidTopology(format!(
                "self-link at node {}",
                from + 1
            )));
        }
        if !(capacity > 0.0 && capacity.is_finite()) {
            return Err(ModelError::InvalidTopology(format!(
                "link {}-{} needs a positive finite capacity",
                from + 1,
                to + 1
            )));
        }
        if !(delay >= 0.0 && delay.is_finite()) {
            return Err(ModelError::InvalidTopology(format!(
                "link {}-{} needs a finite non-negative delay",
                from + 1,
                to + 1
            )));
        }
        if self.delay[(from, to)].is_some() {
            return Err(ModelError::InvalidTopology(format!(
                "duplicate link {}-{}",
                from + 1,
                to + 1
            )));
        }
        self.capacity[(from, to)] = capacity;
        self.delay[(from, to)] = Some(delay);
        insert_sorted(&mut self.out[from], to);
        insert_sorted(&mut self.inc[to], from);
        Ok(())
    }

    pub fn add_bidirectional(
        &mut self,
        a: NodeId,
        b: NodeId,
        capacity: f64,
        delay: f64,
    ) -> Result<(), ModelError> {
        self.add_link(a, b, capacity, delay)?;
        self.add_link(b, a, capacity, delay)
    }

    pub fn has_link(&self, i: NodeId, j: NodeId) -> bool {
        self.delay[(i, j)].is_some()
    }

    /// Zero when there is no link.
    pub fn capacity(&self, i: NodeId, j: NodeId) -> f64 {
        self.capacity[(i, j)]
    }

    pub fn delay(&self, i: NodeId, j: NodeId) -> Option<f64> {
        self.delay[(i, j)]
    }

    pub fn successors(&self, i: NodeId) -> &[NodeId] {
        &self.out[i]
    }

    pub fn predecessors(&self, i: NodeId) -> &[NodeId] {
        &self.inc[i]
    }

    /// Directed links in row-major order.
    pub fn links(&self) -> Vec<(NodeId, NodeId)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(i, js)| js.iter().map(move |&j| (i, j)))
            .collect()
    }

    pub fn link_count(&self) -> usize {
        self.out.iter().map(Vec::len).sum()
    }

    pub fn incoming_capacity(&self, i: NodeId) -> f64 {
        self.inc[i].iter().map(|&k| self.capacity[(k, i)]).sum()
    }

    pub fn walk_delay(&self, walk: &[NodeId]) -> Result<f64, ModelError> {
        walk.windows(2).try_fold(0.0, |acc, w| {
            self.delay(w[0], w[1])
                .map(|d| acc + d)
                .ok_or(ModelError::NotALink {
                    from: w[0],
                    to: w[1],
                })
        })
    }

    /// Every link must have its reverse.
    pub fn check_symmetric(&self) -> Result<(), ModelError> {
        for (i, j) in self.links() {
            if !self.has_link(j, i) {
                return Err(ModelError::InvalidTopology(format!(
                    "link {}-{} has no reverse",
                    i + 1,
                    j + 1
                )));
            }
        }
        Ok(())
    }
}

fn insert_sorted(v: &mut Vec<NodeId>, x: NodeId) {
    if let Err(pos) = v.binary_search(&x) {
        v.insert(pos, x);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PowerState {
    Off,
    Idle,
    Active,
}

impl PowerState {
    pub fn is_on(self) -> bool {
        self != PowerState::Off
    }
}

/// Server attached to a switch. `servers[i]` of a [`Network`] sits at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ServerSpec {
    pub capacity: f64,
    pub energy: f64,
    pub supported: Vec<bool>,
    pub state: PowerState,
    pub idle_fraction: f64,
}

impl ServerSpec {
    /// Placeholder for a switch without a server.
    pub fn absent(vnf_count: usize) -> Self {
        ServerSpec {
            capacity: 0.0,
            energy: 0.0,
            supported: vec![false; vnf_count],
            state: PowerState::Off,
            idle_fraction: 0.0,
        }
    }

    pub fn is_present(&self) -> bool {
        self.capacity > 0.0 || self.energy > 0.0 || self.supported.iter().any(|&s| s)
    }

    pub fn supports(&self, vnf: VnfId) -> bool {
        self.supported.get(vnf).copied().unwrap_or(false)
    }

    pub fn power(&self, state: PowerState) -> f64 {
        match state {
            PowerState::Active => self.energy,
            PowerState::Idle => self.idle_fraction * self.energy,
            PowerState::Off => 0.0,
        }
    }

    pub fn hosted_count(&self) -> usize {
        self.supported.iter().filter(|&&s| s).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VnfCatalog {
    processing: Vec<f64>,
}

impl VnfCatalog {
    pub fn new(processing: Vec<f64>) -> Result<Self, ModelError> {
        if processing.is_empty() {
            return Err(ModelError::InvalidTopology("no VNF types".into()));
        }
        if let Some(x) = processing.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(ModelError::InvalidTopology(format!(
                "VNF {} needs positive processing",
                x + 1
            )));
        }
        Ok(VnfCatalog { processing })
    }

    pub fn uniform(count: usize, processing: f64) -> Result<Self, ModelError> {
        Self::new(vec![processing; count])
    }

    pub fn count(&self) -> usize {
        self.processing.len()
    }

    pub fn processing(&self, x: VnfId) -> f64 {
        self.processing[x]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.processing
    }
}

/// Which servers may receive new VNF types during long-term reallocation.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementLimits {
    pub eligible: Vec<bool>,
    pub max_types: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub topology: Topology,
    pub servers: Vec<ServerSpec>,
    pub vnfs: VnfCatalog,
    pub placement: Option<PlacementLimits>,
}

impl Network {
    pub fn new(
        topology: Topology,
        servers: Vec<ServerSpec>,
        vnfs: VnfCatalog,
    ) -> Result<Self, ModelError> {
        let n = topology.node_count();
        if n == 0 {
            return Err(ModelError::InvalidTopology("no nodes".into()));
        }
        topology.check_symmetric()?;
        if servers.len() != n {
            return Err(ModelError::DimensionMismatch(format!(
                "{} server entries for {n} nodes",
                servers.len()
            )));
        }
        for (i, s) in servers.iter().enumerate() {
            if s.supported.len() != vnfs.count() {
                return Err(ModelError::InvalidServer {
                    node: i,
                    reason: format!(
                        "support vector has {} entries, expected {}",
                        s.supported.len(),
                        vnfs.count()
                    ),
                });
            }
            if !(s.capacity >= 0.0 && s.energy >= 0.0) {
                return Err(ModelError::InvalidServer {
                    node: i,
                    reason: "negative capacity or energy".into(),
                });
            }
            if !(0.0..=1.0).contains(&s.idle_fraction) {
                return Err(ModelError::InvalidServer {
                    node: i,
                    reason: "idle fraction outside [0,1]".into(),
                });
            }
        }
        Ok(Network {
            topology,
            servers,
            vnfs,
            placement: None,
        })
    }

    pub fn with_placement(mut self, limits: PlacementLimits) -> Result<Self, ModelError> {
        if limits.eligible.len() != self.node_count() {
            return Err(ModelError::DimensionMismatch(
                "placement eligibility length".into(),
            ));
        }
        self.placement = Some(limits);
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn vnf_count(&self) -> usize {
        self.vnfs.count()
    }

    pub fn initial_states(&self) -> Vec<PowerState> {
        self.servers.iter().map(|s| s.state).collect()
    }

    /// Σ E over present servers; the all-ON draw.
    pub fn all_on_energy(&self) -> f64 {
        self.servers.iter().map(|s| s.energy).sum()
    }
}

/// A flow request. `rate` is `None` while the size is unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    pub id: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub rate: Option<f64>,
    pub delay_budget: f64,
    pub chain: Vec<VnfId>,
}

impl FlowSpec {
    pub fn new(id: usize, source: NodeId, destination: NodeId, rate: f64, chain: Vec<VnfId>) -> Self {
        FlowSpec {
            id,
            source,
            destination,
            rate: Some(rate),
            delay_budget: f64::INFINITY,
            chain,
        }
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.delay_budget = budget;
        self
    }

    pub fn requests(&self, x: VnfId) -> bool {
        self.chain.contains(&x)
    }

    pub fn validate(&self, n: usize, vnf_count: usize) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidFlow {
            flow: self.id,
            reason,
        };
        if self.source >= n || self.destination >= n {
            return Err(bad("endpoint outside the topology".into()));
        }
        if self.source == self.destination {
            return Err(bad("source equals destination".into()));
        }
        if let Some(r) = self.rate {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(bad(format!("rate {r}")));
            }
        }
        if self.delay_budget.is_nan() || self.delay_budget < 0.0 {
            return Err(bad("negative delay budget".into()));
        }
        for (k, &x) in self.chain.iter().enumerate() {
            if x >= vnf_count {
                return Err(bad(format!("unknown VNF {}", x + 1)));
            }
            if self.chain[..k].contains(&x) {
                return Err(bad(format!("VNF {} repeated in chain", x + 1)));
            }
        }
        Ok(())
    }
}

/// Resolve every flow rate, substituting `stand_in` where unknown.
pub fn resolve_rates(flows: &[FlowSpec], stand_in: Option<f64>) -> Option<Vec<f64>> {
    flows.iter().map(|f| f.rate.or(stand_in)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Horizon {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemMode {
    Sfra,
    EnergySfra(Horizon),
    Grr(Horizon),
}

impl ProblemMode {
    pub fn horizon(self) -> Horizon {
        match self {
            ProblemMode::Sfra => Horizon::ShortTerm,
            ProblemMode::EnergySfra(h) | ProblemMode::Grr(h) => h,
        }
    }

    pub fn is_energy_aware(self) -> bool {
        !matches!(self, ProblemMode::Sfra)
    }

    pub fn is_reallocation(self) -> bool {
        matches!(self, ProblemMode::Grr(_))
    }
}

impl Horizon {
    /// Short-term runs cannot power servers on.
    pub fn usable(self, state: PowerState) -> bool {
        match self {
            Horizon::ShortTerm => state.is_on(),
            Horizon::LongTerm => true,
        }
    }

    /// The previous-state indicator O^{t-1} for this horizon.
    pub fn previously_on(self, state: PowerState) -> bool {
        match self {
            Horizon::ShortTerm => state == PowerState::Active,
            Horizon::LongTerm => state.is_on(),
        }
    }

    /// Context energy E′: the IDLE→ACTIVE difference short-term, full E long-term.
    pub fn energy_prime(self, server: &ServerSpec) -> f64 {
        match self {
            Horizon::ShortTerm => (1.0 - server.idle_fraction) * server.energy,
            Horizon::LongTerm => server.energy,
        }
    }

    /// State for a server after reallocation.
    pub fn settle(self, used: bool, before: PowerState) -> PowerState {
        match (used, self) {
            (true, _) => PowerState::Active,
            (false, Horizon::LongTerm) => PowerState::Off,
            (false, Horizon::ShortTerm) if before.is_on() => PowerState::Idle,
            (false, Horizon::ShortTerm) => PowerState::Off,
        }
    }
}

/// Support matrix S with servers the horizon cannot use masked out.
pub fn effective_support(
    network: &Network,
    states: &[PowerState],
    horizon: Horizon,
) -> Matrix<bool> {
    let mut s = Matrix::new(network.node_count(), network.vnf_count());
    for (i, srv) in network.servers.iter().enumerate() {
        if horizon.usable(states[i]) {
            for x in 0..network.vnf_count() {
                s[(i, x)] = srv.supports(x);
            }
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilizationCaps {
    pub mu_l: f64,
    pub mu_s: f64,
}

impl Default for UtilizationCaps {
    fn default() -> Self {
        UtilizationCaps {
            mu_l: 1.0,
            mu_s: 1.0,
        }
    }
}

/// Loads, installed routing and server states in force before a decision.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub load: Matrix<f64>,
    pub processing: Matrix<f64>,
    pub installed: Vec<Option<FlowRoute>>,
    pub server_states: Vec<PowerState>,
    pub caps: UtilizationCaps,
}

impl NetworkState {
    /// No traffic, no installed flows, server states as configured.
    pub fn empty(network: &Network) -> Self {
        let n = network.node_count();
        NetworkState {
            load: Matrix::new(n, n),
            processing: Matrix::new(n, network.vnf_count()),
            installed: Vec::new(),
            server_states: network.initial_states(),
            caps: UtilizationCaps::default(),
        }
    }

    /// Loads recomputed from installed walks at the given rates.
    pub fn from_routes(
        network: &Network,
        flows: &[FlowSpec],
        routes: Vec<Option<FlowRoute>>,
        rates: &[f64],
        server_states: Vec<PowerState>,
        caps: UtilizationCaps,
    ) -> Result<Self, ModelError> {
        if routes.len() != flows.len() || rates.len() != flows.len() {
            return Err(ModelError::DimensionMismatch(
                "routes, rates and flows differ in length".into(),
            ));
        }
        let mut state = NetworkState {
            server_states,
            caps,
            ..NetworkState::empty(network)
        };
        for ((flow, route), &rate) in flows.iter().zip(&routes).zip(rates) {
            if let Some(route) = route {
                state.add_route(network, flow, route, rate);
            }
        }
        state.installed = routes;
        Ok(state)
    }

    pub fn add_route(&mut self, network: &Network, flow: &FlowSpec, route: &FlowRoute, rate: f64) {
        for (i, j) in route.edges() {
            self.load[(i, j)] += rate;
        }
        for (node, x) in route.assignment(&flow.chain) {
            self.processing[(node, x)] += rate * network.vnfs.processing(x);
        }
    }

    pub fn link_residual(&self, network: &Network, i: NodeId, j: NodeId) -> f64 {
        self.caps.mu_l * network.topology.capacity(i, j) - self.load[(i, j)]
    }

    pub fn server_residual(&self, network: &Network, i: NodeId) -> f64 {
        self.caps.mu_s * network.servers[i].capacity - self.processing.row(i).iter().sum::<f64>()
    }

    pub fn installed_route(&self, f: usize) -> Option<&FlowRoute> {
        self.installed.get(f).and_then(Option::as_ref)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topology_rejects_self_links_and_duplicates() {
        let mut t = Topology::new(3);
        assert!(t.add_link(0, 0, 1.0, 1.0).is_err());
        t.add_link(0, 1, 1.0, 1.0).unwrap();
        assert!(t.add_link(0, 1, 1.0, 1.0).is_err());
        assert!(t.check_symmetric().is_err());
        t.add_link(1, 0, 1.0, 1.0).unwrap();
        t.check_symmetric().unwrap();
        assert_eq!(t.capacity(0, 2), 0.0);
        assert_eq!(t.delay(0, 2), None);
    }

    #[test]
    fn power_by_state() {
        let s = ServerSpec {
            capacity: 1.0,
            energy: 200.0,
            supported: vec![true],
            state: PowerState::Idle,
            idle_fraction: 0.6,
        };
        assert_eq!(s.power(PowerState::Active), 200.0);
        assert_eq!(s.power(PowerState::Idle), 0.6 * 200.0);
        assert_eq!(s.power(PowerState::Off), 0.0);
    }

    #[test]
    fn flow_validation() {
        let f = FlowSpec::new(1, 0, 0, 0.1, vec![]);
        assert!(f.validate(3, 2).is_err());
        let f = FlowSpec::new(1, 0, 1, 0.1, vec![1, 1]);
        assert!(f.validate(3, 2).is_err());
        let f = FlowSpec::new(1, 0, 1, 0.1, vec![1, 0]);
        f.validate(3, 2).unwrap();
        assert!(f.requests(0) && !FlowSpec::new(2, 0, 1, 0.1, vec![1]).requests(0));
    }

    #[test]
    fn horizon_semantics() {
        let s = ServerSpec {
            capacity: 1.0,
            energy: 400.0,
            supported: vec![true],
            state: PowerState::Idle,
            idle_fraction: 0.6,
        };
        assert!((Horizon::ShortTerm.energy_prime(&s) - 160.0).abs() < 1e-12);
        assert_eq!(Horizon::LongTerm.energy_prime(&s), 400.0);
        assert!(!Horizon::ShortTerm.usable(PowerState::Off));
        assert!(Horizon::LongTerm.usable(PowerState::Off));
        assert!(!Horizon::ShortTerm.previously_on(PowerState::Idle));
        assert!(Horizon::LongTerm.previously_on(PowerState::Idle));
        assert_eq!(Horizon::ShortTerm.settle(false, PowerState::Active), PowerState::Idle);
        assert_eq!(Horizon::LongTerm.settle(false, PowerState::Active), PowerState::Off);
        assert_eq!(Horizon::ShortTerm.settle(false, PowerState::Off), PowerState::Off);
    }
}
