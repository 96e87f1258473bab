//! Constraint evaluation for the allocation and reallocation models.
//!
//! Every check returns a [`ConstraintReport`] listing each violated row
//! individually. Nonlinear rows and their big-M replacements are evaluated
//! side by side so the two can be compared.

mod report;

pub use report::{ConstraintId, ConstraintReport, Violation};

use thiserror::Error;

use crate::model::{
    effective_support, resolve_rates, FlowSpec, Matrix, Network, NetworkState, ProblemMode,
    RoutingSolution, routing_from_walk, ModelError,
};

/// Absolute tolerance on real-valued capacity and delay rows.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulationError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("rate of flow {flow} is unknown and no stand-in was given")]
    RatesUnknown { flow: usize },
    #[error("alpha {0} outside [0, 1]")]
    BadAlpha(f64),
    #[error("walk mode needs the walk of flow {flow}")]
    MissingRoute { flow: usize },
}

impl From<ModelError> for FormulationError {
    fn from(e: ModelError) -> Self {
        FormulationError::DimensionMismatch(e.to_string())
    }
}

/// Allocation rows add background loads; reallocation rows do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CapacityVariant {
    Allocation,
    Reallocation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationOptions {
    pub mode: ProblemMode,
    /// Check loop-freedom per segment rather than per flow.
    pub walk_mode: bool,
    pub check_delay: bool,
    pub stand_in_rate: Option<f64>,
}

impl ValidationOptions {
    pub fn new(mode: ProblemMode) -> Self {
        ValidationOptions {
            mode,
            walk_mode: false,
            check_delay: true,
            stand_in_rate: None,
        }
    }

    pub fn walk_mode(mut self, on: bool) -> Self {
        self.walk_mode = on;
        self
    }
}

fn check_dims(network: &Network, flows: &[FlowSpec], sol: &RoutingSolution) -> Result<(), FormulationError> {
    let n = network.node_count();
    let x = network.vnf_count();
    if sol.flows.len() != flows.len() {
        return Err(FormulationError::DimensionMismatch(format!(
            "{} flows but {} solution entries",
            flows.len(),
            sol.flows.len()
        )));
    }
    if !sol.routes.is_empty() && sol.routes.len() != flows.len() {
        return Err(FormulationError::DimensionMismatch("route list length".into()));
    }
    if sol.next_state.len() != n {
        return Err(FormulationError::DimensionMismatch(format!(
            "O^t has {} entries for {n} nodes",
            sol.next_state.len()
        )));
    }
    for m in &sol.flows {
        if m.r.dims() != (n, n) || m.q.dims() != (n, n) || m.u.dims() != (n, x) {
            return Err(FormulationError::DimensionMismatch(
                "R, Q must be N×N and U must be N×X".into(),
            ));
        }
    }
    Ok(())
}

fn violation(
    constraint: ConstraintId,
    flow: Option<usize>,
    i: Option<usize>,
    j: Option<usize>,
    x: Option<usize>,
    slack: f64,
) -> Violation {
    Violation {
        constraint,
        flow,
        i,
        j,
        x,
        slack,
    }
}

/// Chain coverage, crossing, support and single delivery.
pub fn check_chain_membership(
    network: &Network,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
    support: &Matrix<bool>,
) -> Result<ConstraintReport, FormulationError> {
    use ConstraintId::*;
    check_dims(network, flows, sol)?;
    let n = network.node_count();
    let mut rep = ConstraintReport::new();
    for id in [Eq2, Eq3, Eq4, Eq5] {
        rep.mark_checked(id);
    }
    for (flow, m) in flows.iter().zip(&sol.flows) {
        let fid = Some(flow.id);
        let inflow: Vec<i64> = (0..n)
            .map(|j| (0..n).map(|i| m.r[(i, j)] as i64).sum())
            .collect();
        for x in 0..network.vnf_count() {
            let col: i64 = (0..n).map(|i| m.u[(i, x)] as i64).sum();
            let v = flow.requests(x) as i64;
            if col != v {
                rep.push(violation(Eq2, fid, None, None, Some(x), (v - col) as f64));
            }
            if col > 1 {
                rep.push(violation(Eq5, fid, None, None, Some(x), (1 - col) as f64));
            }
            for i in 0..n {
                let u = m.u[(i, x)] as i64;
                if u > support[(i, x)] as i64 {
                    rep.push(violation(Eq4, fid, Some(i), None, Some(x), -1.0));
                }
                if i != flow.source && inflow[i] < u {
                    rep.push(violation(
                        Eq3,
                        fid,
                        None,
                        Some(i),
                        Some(x),
                        (inflow[i] - u) as f64,
                    ));
                }
            }
        }
    }
    Ok(rep)
}

/// Server processing and link capacity rows.
#[allow(clippy::too_many_arguments)]
pub fn check_capacity(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
    rates: &[f64],
    variant: CapacityVariant,
    walk_mode: bool,
) -> Result<ConstraintReport, FormulationError> {
    check_dims(network, flows, sol)?;
    if rates.len() != flows.len() {
        return Err(FormulationError::DimensionMismatch("one rate per flow".into()));
    }
    let n = network.node_count();
    let (server_id, link_id) = match variant {
        CapacityVariant::Allocation => (ConstraintId::Eq6, ConstraintId::Eq7),
        CapacityVariant::Reallocation => (ConstraintId::Eq27, ConstraintId::Eq28),
    };
    let background = variant == CapacityVariant::Allocation;
    let mut rep = ConstraintReport::new();
    rep.mark_checked(server_id);
    rep.mark_checked(link_id);

    let mut server_load = vec![0.0; n];
    let mut link_load = Matrix::<f64>::new(n, n);
    for (k, (m, &t)) in sol.flows.iter().zip(rates).enumerate() {
        for ((i, x), &u) in m.u.iter() {
            if u > 0 {
                server_load[i] += u as f64 * t * network.vnfs.processing(x);
            }
        }
        match (walk_mode, sol.routes.get(k).and_then(Option::as_ref)) {
            (true, Some(route)) => {
                for (i, j) in route.edges() {
                    link_load[(i, j)] += t;
                }
            }
            (true, None) => return Err(FormulationError::MissingRoute { flow: flows[k].id }),
            (false, _) => {
                for ((i, j), &r) in m.r.iter() {
                    if r > 0 {
                        link_load[(i, j)] += r as f64 * t;
                    }
                }
            }
        }
    }
    for i in 0..n {
        let mut lhs = server_load[i];
        if background {
            lhs += state.processing.row(i).iter().sum::<f64>();
        }
        let cap = state.caps.mu_s * network.servers[i].capacity;
        if lhs > cap + TOLERANCE {
            rep.push(violation(server_id, None, Some(i), None, None, cap - lhs));
        }
    }
    for ((i, j), &load) in link_load.iter() {
        let exists = network.topology.has_link(i, j);
        if !exists && load == 0.0 {
            continue;
        }
        let mut lhs = load;
        if background && exists {
            lhs += state.load[(i, j)];
        }
        let cap = state.caps.mu_l * network.topology.capacity(i, j);
        if lhs > cap + TOLERANCE {
            rep.push(violation(link_id, None, Some(i), Some(j), None, cap - lhs));
        }
    }
    Ok(rep)
}

/// Conservation, one successor per switch, and delay budgets. In walk mode
/// the first two are checked per segment and the delay over the whole walk.
pub fn check_flow_conservation(
    network: &Network,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
    walk_mode: bool,
    check_delay: bool,
) -> Result<ConstraintReport, FormulationError> {
    use ConstraintId::*;
    check_dims(network, flows, sol)?;
    let n = network.node_count();
    let topo = &network.topology;
    let mut rep = ConstraintReport::new();
    rep.mark_checked(Eq10);
    rep.mark_checked(Eq11);
    if check_delay {
        rep.mark_checked(Eq12);
    }
    for (k, (flow, m)) in flows.iter().zip(&sol.flows).enumerate() {
        let fid = Some(flow.id);
        if walk_mode {
            let route = sol
                .routes
                .get(k)
                .and_then(Option::as_ref)
                .ok_or(FormulationError::MissingRoute { flow: flow.id })?;
            if route.source() != flow.source || route.destination() != flow.destination {
                rep.push(violation(Eq10, fid, Some(route.source()), None, None, -1.0));
            }
            for seg in route.segments() {
                if seg.len() < 2 {
                    continue;
                }
                let mut out = vec![0i64; n];
                let mut inc = vec![0i64; n];
                for w in seg.windows(2) {
                    out[w[0]] += 1;
                    inc[w[1]] += 1;
                }
                let (a, b) = (seg[0], seg[seg.len() - 1]);
                for i in seg.iter().copied().collect::<std::collections::BTreeSet<_>>() {
                    let want = if a == b {
                        0
                    } else if i == a {
                        1
                    } else if i == b {
                        -1
                    } else {
                        0
                    };
                    if out[i] - inc[i] != want {
                        rep.push(violation(Eq10, fid, Some(i), None, None, (want - (out[i] - inc[i])) as f64));
                    }
                    if out[i] > 1 {
                        rep.push(violation(Eq11, fid, Some(i), None, None, (1 - out[i]) as f64));
                    }
                }
            }
            if check_delay {
                let delay = topo.walk_delay(route.walk()).unwrap_or(f64::INFINITY);
                if delay > flow.delay_budget + TOLERANCE {
                    rep.push(violation(Eq12, fid, None, None, None, flow.delay_budget - delay));
                }
            }
            continue;
        }
        let mut delay = 0.0;
        for i in 0..n {
            let out: i64 = (0..n).map(|j| m.r[(i, j)] as i64).sum();
            let inc: i64 = (0..n).map(|j| m.r[(j, i)] as i64).sum();
            let want = if i == flow.source {
                1
            } else if i == flow.destination {
                -1
            } else {
                0
            };
            if out - inc != want {
                rep.push(violation(Eq10, fid, Some(i), None, None, (want - (out - inc)) as f64));
            }
            if out > 1 {
                rep.push(violation(Eq11, fid, Some(i), None, None, (1 - out) as f64));
            }
            for j in 0..n {
                if m.r[(i, j)] > 0 {
                    delay += m.r[(i, j)] as f64 * topo.delay(i, j).unwrap_or(f64::INFINITY);
                }
            }
        }
        if check_delay && delay > flow.delay_budget + TOLERANCE {
            rep.push(violation(Eq12, fid, None, None, None, flow.delay_budget - delay));
        }
    }
    Ok(rep)
}

/// Structural Q rows for one (sub)path with endpoints `s`, `d`.
///
/// The destination's diagonal entry is a path-length register, so it is left
/// out of the column sum in the destination row.
fn structural_q(
    rep: &mut ConstraintReport,
    fid: Option<usize>,
    r: &Matrix<u8>,
    q: &Matrix<u32>,
    s: usize,
    d: usize,
) {
    use ConstraintId::*;
    let n = r.rows();
    let nn = n as i64;
    let qv = |i: usize, j: usize| q[(i, j)] as i64;
    let rv = |i: usize, j: usize| r[(i, j)] as i64;
    for i in 0..n {
        for j in 0..n {
            if qv(i, j) < rv(i, j) {
                rep.push(violation(Eq13, fid, Some(i), Some(j), None, (qv(i, j) - rv(i, j)) as f64));
            }
            if i != d {
                let prod = qv(i, j) * rv(i, j);
                if prod != qv(i, j) {
                    rep.push(violation(Eq14, fid, Some(i), Some(j), None, (prod - qv(i, j)) as f64));
                }
                if qv(i, j) > nn * rv(i, j) {
                    rep.push(violation(Eq23, fid, Some(i), Some(j), None, (nn * rv(i, j) - qv(i, j)) as f64));
                }
            }
        }
        if i != d && qv(d, i) != 0 {
            rep.push(violation(Eq15, fid, Some(d), Some(i), None, -(qv(d, i) as f64)));
        }
        if i != s && i != d {
            let out: i64 = (0..n).map(|j| qv(i, j)).sum();
            let inq: i64 = (0..n).map(|j| qv(j, i)).sum();
            let inr: i64 = (0..n).map(|j| rv(j, i)).sum();
            if out != inq + inr {
                rep.push(violation(Eq16, fid, Some(i), None, None, (inq + inr - out) as f64));
            }
        }
    }
    let inq: i64 = (0..n).filter(|&j| j != d).map(|j| qv(j, d)).sum();
    let inr: i64 = (0..n).map(|j| rv(j, d)).sum();
    if qv(d, d) != inq + inr {
        rep.push(violation(Eq17, fid, Some(d), Some(d), None, (inq + inr - qv(d, d)) as f64));
    }
    let out_s: i64 = (0..n).map(|j| qv(s, j)).sum();
    if out_s != 1 {
        rep.push(violation(Eq18, fid, Some(s), None, None, (1 - out_s) as f64));
    }
}

/// Ordered-routing structure and chain order, in both product and big-M form.
pub fn check_ordering(
    network: &Network,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
    walk_mode: bool,
) -> Result<ConstraintReport, FormulationError> {
    use ConstraintId::*;
    check_dims(network, flows, sol)?;
    let n = network.node_count();
    let big = 2 * n as i64 - 1;
    let mut rep = ConstraintReport::new();
    for id in [Eq13, Eq15, Eq16, Eq17, Eq18, Eq19, Eq23, Eq24] {
        rep.mark_checked(id);
    }
    if !walk_mode {
        rep.mark_checked(Eq14);
    }
    for (k, (flow, m)) in flows.iter().zip(&sol.flows).enumerate() {
        let fid = Some(flow.id);
        if walk_mode {
            let route = sol
                .routes
                .get(k)
                .and_then(Option::as_ref)
                .ok_or(FormulationError::MissingRoute { flow: flow.id })?;
            for seg in route.segments() {
                if seg.len() < 2 {
                    continue;
                }
                match routing_from_walk(seg, &network.topology) {
                    Ok((r, q)) => structural_q(&mut rep, fid, &r, &q, seg[0], seg[seg.len() - 1]),
                    Err(_) => rep.push(violation(Eq11, fid, Some(seg[0]), None, None, -1.0)),
                }
            }
            let pos = route.service();
            for v in 0..pos.len().min(flow.chain.len()) {
                for z in 0..v {
                    if pos[v] < pos[z] {
                        let slack = pos[v] as f64 - pos[z] as f64;
                        rep.push(violation(Eq19, fid, Some(route.walk()[pos[v]]), None, Some(flow.chain[v]), slack));
                        rep.push(violation(Eq24, fid, Some(route.walk()[pos[v]]), Some(route.walk()[pos[z]]), Some(flow.chain[v]), slack));
                    }
                }
            }
            continue;
        }
        structural_q(&mut rep, fid, &m.r, &m.q, flow.source, flow.destination);
        let step: Vec<i64> = (0..n).map(|i| (0..n).map(|j| m.q[(i, j)] as i64).sum()).collect();
        let u = |i: usize, x: usize| m.u[(i, x)] as i64;
        for (v, &kv) in flow.chain.iter().enumerate() {
            for &kz in &flow.chain[..v] {
                let later: i64 = (0..n).map(|i| step[i] * u(i, kv)).sum();
                let earlier: i64 = (0..n).map(|i| step[i] * u(i, kz)).sum();
                if later < earlier {
                    rep.push(violation(Eq19, fid, None, None, Some(kv), (later - earlier) as f64));
                }
                for i in 0..n {
                    for big_i in 0..n {
                        let lhs = (1 - u(i, kv)) * big + step[i];
                        let rhs = (u(big_i, kz) - 1) * big + step[big_i];
                        if lhs < rhs {
                            rep.push(violation(Eq24, fid, Some(i), Some(big_i), Some(kv), (lhs - rhs) as f64));
                        }
                    }
                }
            }
        }
    }
    Ok(rep)
}

/// Server activation rows: O^t must mark exactly the servers in use.
pub fn check_energy(
    network: &Network,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
) -> Result<ConstraintReport, FormulationError> {
    use ConstraintId::*;
    check_dims(network, flows, sol)?;
    let n = network.node_count();
    let big = 1 + (flows.len() * network.vnf_count()) as i64;
    let mut rep = ConstraintReport::new();
    for id in [Eq21, Eq22, Eq25] {
        rep.mark_checked(id);
    }
    let mut usage = vec![0i64; n];
    for m in &sol.flows {
        for ((i, _), &u) in m.u.iter() {
            usage[i] += u as i64;
        }
    }
    for i in 0..n {
        let o = sol.next_state[i] as i64;
        if o > usage[i] {
            rep.push(violation(Eq21, None, Some(i), None, None, (usage[i] - o) as f64));
        }
        if o * usage[i] != usage[i] {
            rep.push(violation(Eq22, None, Some(i), None, None, (o * usage[i] - usage[i]) as f64));
        }
        if big * o < usage[i] {
            rep.push(violation(Eq25, None, Some(i), None, None, (big * o - usage[i]) as f64));
        }
    }
    Ok(rep)
}

/// Every row that applies to `opts.mode`.
pub fn validate(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
    opts: &ValidationOptions,
) -> Result<ConstraintReport, FormulationError> {
    check_dims(network, flows, sol)?;
    if state.server_states.len() != network.node_count() {
        return Err(FormulationError::DimensionMismatch("server state vector".into()));
    }
    let rates = resolve_rates(flows, opts.stand_in_rate).ok_or_else(|| {
        let f = flows.iter().find(|f| f.rate.is_none()).map(|f| f.id).unwrap_or(0);
        FormulationError::RatesUnknown { flow: f }
    })?;
    let support = effective_support(network, &state.server_states, opts.mode.horizon());
    let variant = if opts.mode.is_reallocation() {
        CapacityVariant::Reallocation
    } else {
        CapacityVariant::Allocation
    };
    let mut rep = check_chain_membership(network, flows, sol, &support)?;
    rep.merge(check_capacity(network, state, flows, sol, &rates, variant, opts.walk_mode)?);
    rep.merge(check_flow_conservation(network, flows, sol, opts.walk_mode, opts.check_delay)?);
    rep.merge(check_ordering(network, flows, sol, opts.walk_mode)?);
    if opts.mode.is_energy_aware() {
        rep.merge(check_energy(network, flows, sol)?);
    }
    Ok(rep)
}

/// Σ|R − M| over all flows, with M taken from `state.installed`.
pub fn reconfiguration_count(state: &NetworkState, sol: &RoutingSolution) -> usize {
    sol.flows
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let installed = state.installed_route(k).map(|r| r.edge_set()).unwrap_or_default();
            m.r.iter()
                .map(|((i, j), &r)| {
                    let mv = installed.contains(&(i, j)) as i64;
                    (r as i64 - mv).unsigned_abs() as usize
                })
                .sum::<usize>()
        })
        .sum()
}

/// Objective of `mode` at `sol`. `alpha` only matters for reallocation.
pub fn objective_value(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    sol: &RoutingSolution,
    mode: ProblemMode,
    alpha: f64,
) -> Result<f64, FormulationError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(FormulationError::BadAlpha(alpha));
    }
    check_dims(network, flows, sol)?;
    let n = network.node_count();
    match mode {
        ProblemMode::Sfra => Ok(sol
            .flows
            .iter()
            .map(|m| m.r.as_slice().iter().map(|&v| v as f64).sum::<f64>())
            .sum()),
        ProblemMode::EnergySfra(h) => Ok((0..n)
            .filter(|&i| sol.next_state[i] && !h.previously_on(state.server_states[i]))
            .map(|i| h.energy_prime(&network.servers[i]))
            .sum()),
        ProblemMode::Grr(h) => {
            let f = flows.len();
            let reconf = if f == 0 || n < 2 {
                0.0
            } else {
                reconfiguration_count(state, sol) as f64 / ((n - 1) * f) as f64
            };
            let total: f64 = network.servers.iter().map(|s| h.energy_prime(s)).sum();
            let energy = if total > 0.0 {
                (0..n)
                    .filter(|&i| sol.next_state[i])
                    .map(|i| h.energy_prime(&network.servers[i]))
                    .sum::<f64>()
                    / total
            } else {
                0.0
            };
            Ok(alpha * reconf + (1.0 - alpha) * energy)
        }
    }
}
