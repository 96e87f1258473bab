//! Line-oriented text formats for topologies, scenarios and solutions.
//!
//! All node and VNF indices in files are 1-based. `#` starts a comment.
//! See the README for the full grammar.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    routing_from_walk, Allocation, FlowMatrices, FlowRoute, FlowSpec, ModelError, Network, NodeId,
    PlacementLimits, PowerState, RoutingSolution, ServerSpec, Topology, UtilizationCaps,
    VnfCatalog, VnfId,
};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

pub(crate) fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

pub(crate) fn lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let body = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = body.split_whitespace().collect();
        (!toks.is_empty()).then_some((k + 1, toks))
    })
}

pub(crate) fn num(line: usize, tok: &str) -> Result<f64, ParseError> {
    match tok {
        "inf" => Ok(f64::INFINITY),
        _ => tok
            .parse::<f64>()
            .ok()
            .filter(|v| !v.is_nan())
            .ok_or_else(|| err(line, format!("expected a number, found `{tok}`"))),
    }
}

pub(crate) fn index(line: usize, tok: &str, bound: usize, what: &str) -> Result<usize, ParseError> {
    let v: usize = tok
        .parse()
        .map_err(|_| err(line, format!("expected a {what} index, found `{tok}`")))?;
    if v == 0 || v > bound {
        return Err(err(line, format!("{what} {v} outside 1..={bound}")));
    }
    Ok(v - 1)
}

fn count(line: usize, tok: &str) -> Result<usize, ParseError> {
    tok.parse()
        .map_err(|_| err(line, format!("expected a count, found `{tok}`")))
}

pub(crate) fn arity(line: usize, toks: &[&str], min: usize, max: usize) -> Result<(), ParseError> {
    if toks.len() < min || toks.len() > max {
        return Err(err(
            line,
            format!("`{}` takes {} to {} fields, found {}", toks[0], min - 1, max - 1, toks.len() - 1),
        ));
    }
    Ok(())
}

fn vnf_list(line: usize, tok: &str, x: usize) -> Result<Vec<VnfId>, ParseError> {
    if tok == "-" {
        return Ok(Vec::new());
    }
    tok.split(',').map(|t| index(line, t, x, "VNF")).collect()
}

fn power_state(line: usize, tok: &str) -> Result<PowerState, ParseError> {
    match tok.to_ascii_uppercase().as_str() {
        "OFF" => Ok(PowerState::Off),
        "IDLE" => Ok(PowerState::Idle),
        "ACTIVE" => Ok(PowerState::Active),
        _ => Err(err(line, format!("unknown power state `{tok}`"))),
    }
}

pub fn state_name(s: PowerState) -> &'static str {
    match s {
        PowerState::Off => "OFF",
        PowerState::Idle => "IDLE",
        PowerState::Active => "ACTIVE",
    }
}

fn model(line: usize) -> impl Fn(ModelError) -> ParseError {
    move |e| err(line, e.to_string())
}

/// Parse a topology file into a validated [`Network`].
pub fn parse_topology(text: &str) -> Result<Network, ParseError> {
    let mut n: Option<usize> = None;
    let mut x: Option<usize> = None;
    let mut processing: Option<Vec<f64>> = None;
    let mut delta = 0.6;
    let mut topo: Option<Topology> = None;
    let mut servers: Vec<Option<ServerSpec>> = Vec::new();
    let mut server_lines = Vec::new();
    let mut max_types: Option<usize> = None;
    let mut eligible: Option<Vec<usize>> = None;
    let mut last = 0;

    for (ln, t) in lines(text) {
        last = ln;
        match t[0] {
            "nodes" => {
                arity(ln, &t, 2, 2)?;
                if n.is_some() {
                    return Err(err(ln, "`nodes` given twice"));
                }
                let v = count(ln, t[1])?;
                if v == 0 {
                    return Err(err(ln, "need at least one node"));
                }
                n = Some(v);
                topo = Some(Topology::new(v));
                servers = vec![None; v];
            }
            "vnfs" => {
                arity(ln, &t, 2, 2)?;
                let v = count(ln, t[1])?;
                if v == 0 {
                    return Err(err(ln, "need at least one VNF type"));
                }
                x = Some(v);
            }
            "processing" => {
                let p = t[1..].iter().map(|s| num(ln, s)).collect::<Result<Vec<_>, _>>()?;
                processing = Some(p);
            }
            "delta" => {
                arity(ln, &t, 2, 2)?;
                delta = num(ln, t[1])?;
            }
            "link" | "edge" => {
                arity(ln, &t, 5, 5)?;
                let nn = n.ok_or_else(|| err(ln, "`nodes` must come before links"))?;
                let i = index(ln, t[1], nn, "node")?;
                let j = index(ln, t[2], nn, "node")?;
                let cap = num(ln, t[3])?;
                let delay = num(ln, t[4])?;
                let topo = topo.as_mut().unwrap();
                if t[0] == "edge" {
                    topo.add_bidirectional(i, j, cap, delay).map_err(model(ln))?;
                } else {
                    topo.add_link(i, j, cap, delay).map_err(model(ln))?;
                }
            }
            "server" => {
                arity(ln, &t, 6, 7)?;
                server_lines.push((ln, t));
            }
            "placement" => {
                arity(ln, &t, 2, 2)?;
                max_types = Some(count(ln, t[1])?);
            }
            "eligible" => {
                let nn = n.ok_or_else(|| err(ln, "`nodes` must come before `eligible`"))?;
                eligible = Some(
                    t[1..]
                        .iter()
                        .map(|s| index(ln, s, nn, "node"))
                        .collect::<Result<_, _>>()?,
                );
            }
            other => return Err(err(ln, format!("unknown keyword `{other}`"))),
        }
    }

    let n = n.ok_or_else(|| err(last.max(1), "missing `nodes` line"))?;
    let x = match (x, &processing) {
        (Some(x), _) => x,
        (None, Some(p)) => p.len(),
        (None, None) => return Err(err(last.max(1), "missing `vnfs` line")),
    };
    let processing = processing.unwrap_or_else(|| vec![1.0; x]);
    if processing.len() != x {
        return Err(err(
            last.max(1),
            format!("{} processing values for {x} VNF types", processing.len()),
        ));
    }
    let vnfs = VnfCatalog::new(processing).map_err(model(last.max(1)))?;

    for (ln, t) in server_lines {
        let node = index(ln, t[1], n, "node")?;
        if servers[node].is_some() {
            return Err(err(ln, format!("second server at node {}", node + 1)));
        }
        let list = vnf_list(ln, t[4], x)?;
        let mut supported = vec![false; x];
        for v in list {
            supported[v] = true;
        }
        let idle_fraction = match t.get(6) {
            Some(tok) => num(ln, tok)?,
            None => delta,
        };
        servers[node] = Some(ServerSpec {
            capacity: num(ln, t[2])?,
            energy: num(ln, t[3])?,
            supported,
            state: power_state(ln, t[5])?,
            idle_fraction,
        });
    }
    let servers: Vec<ServerSpec> = servers
        .into_iter()
        .map(|s| s.unwrap_or_else(|| ServerSpec::absent(x)))
        .collect();
    let mut network = Network::new(topo.unwrap(), servers, vnfs).map_err(model(last.max(1)))?;
    if let Some(max_types) = max_types {
        let mut elig = vec![false; n];
        match eligible {
            Some(list) => list.into_iter().for_each(|i| elig[i] = true),
            None => (0..n).for_each(|i| elig[i] = network.servers[i].is_present()),
        }
        network = network
            .with_placement(PlacementLimits {
                eligible: elig,
                max_types,
            })
            .map_err(model(last.max(1)))?;
    }
    Ok(network)
}

fn join_vnfs(list: impl Iterator<Item = VnfId>) -> String {
    let s: Vec<String> = list.map(|v| (v + 1).to_string()).collect();
    if s.is_empty() {
        "-".into()
    } else {
        s.join(",")
    }
}

pub fn write_topology(network: &Network) -> String {
    let mut out = String::new();
    let n = network.node_count();
    let _ = writeln!(out, "nodes {n}");
    let _ = writeln!(out, "vnfs {}", network.vnf_count());
    let p: Vec<String> = network.vnfs.as_slice().iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "processing {}", p.join(" "));
    for (i, j) in network.topology.links() {
        let _ = writeln!(
            out,
            "link {} {} {} {}",
            i + 1,
            j + 1,
            network.topology.capacity(i, j),
            network.topology.delay(i, j).unwrap()
        );
    }
    for (i, s) in network.servers.iter().enumerate() {
        if !s.is_present() {
            continue;
        }
        let supported = join_vnfs((0..network.vnf_count()).filter(|&x| s.supports(x)));
        let _ = writeln!(
            out,
            "server {} {} {} {} {} {}",
            i + 1,
            s.capacity,
            s.energy,
            supported,
            state_name(s.state),
            s.idle_fraction
        );
    }
    if let Some(p) = &network.placement {
        let _ = writeln!(out, "placement {}", p.max_types);
        let e: Vec<String> = (0..n).filter(|&i| p.eligible[i]).map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(out, "eligible {}", e.join(" "));
    }
    out
}

/// Flows plus scenario-wide settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub flows: Vec<FlowSpec>,
    pub caps: UtilizationCaps,
    /// Arrival time per flow; flows without an `arrive` line arrive at 0.
    pub arrivals: Vec<f64>,
}

impl Scenario {
    pub fn new(flows: Vec<FlowSpec>) -> Self {
        let arrivals = vec![0.0; flows.len()];
        Scenario {
            flows,
            caps: UtilizationCaps::default(),
            arrivals,
        }
    }
}

pub fn parse_scenario(text: &str, network: &Network) -> Result<Scenario, ParseError> {
    let n = network.node_count();
    let x = network.vnf_count();
    let mut flows: Vec<FlowSpec> = Vec::new();
    let mut caps = UtilizationCaps::default();
    let mut arrive: Vec<(usize, usize, f64)> = Vec::new();
    for (ln, t) in lines(text) {
        match t[0] {
            "mu_l" => {
                arity(ln, &t, 2, 2)?;
                caps.mu_l = num(ln, t[1])?;
            }
            "mu_s" => {
                arity(ln, &t, 2, 2)?;
                caps.mu_s = num(ln, t[1])?;
            }
            "flow" => {
                arity(ln, &t, 7, 7)?;
                let id = count(ln, t[1])?;
                if flows.iter().any(|f| f.id == id) {
                    return Err(err(ln, format!("flow {id} defined twice")));
                }
                let rate = match t[4] {
                    "?" => None,
                    tok => Some(num(ln, tok)?),
                };
                let flow = FlowSpec {
                    id,
                    source: index(ln, t[2], n, "node")?,
                    destination: index(ln, t[3], n, "node")?,
                    rate,
                    delay_budget: num(ln, t[5])?,
                    chain: vnf_list(ln, t[6], x)?,
                };
                flow.validate(n, x).map_err(model(ln))?;
                flows.push(flow);
            }
            "arrive" => {
                arity(ln, &t, 3, 3)?;
                arrive.push((ln, count(ln, t[1])?, num(ln, t[2])?));
            }
            other => return Err(err(ln, format!("unknown keyword `{other}`"))),
        }
    }
    if !(caps.mu_l > 0.0 && caps.mu_s > 0.0) {
        return Err(err(1, "utilization caps must be positive"));
    }
    let mut arrivals = vec![0.0; flows.len()];
    for (ln, id, t) in arrive {
        let k = flows
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| err(ln, format!("arrival for unknown flow {id}")))?;
        if !(t >= 0.0 && t.is_finite()) {
            return Err(err(ln, "arrival time must be finite and non-negative"));
        }
        arrivals[k] = t;
    }
    Ok(Scenario {
        flows,
        caps,
        arrivals,
    })
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map(|v| v.to_string()).unwrap_or_else(|| "?".into())
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        v.to_string()
    }
}

pub fn write_scenario(scenario: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "mu_l {}", scenario.caps.mu_l);
    let _ = writeln!(out, "mu_s {}", scenario.caps.mu_s);
    for f in &scenario.flows {
        let _ = writeln!(
            out,
            "flow {} {} {} {} {} {}",
            f.id,
            f.source + 1,
            f.destination + 1,
            fmt_rate(f.rate),
            fmt_num(f.delay_budget),
            join_vnfs(f.chain.iter().copied())
        );
    }
    for (f, &t) in scenario.flows.iter().zip(&scenario.arrivals) {
        if t != 0.0 {
            let _ = writeln!(out, "arrive {} {}", f.id, t);
        }
    }
    out
}

/// One flow as written in a dump: the walk and raw `assign` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowEntry {
    pub walk: Vec<NodeId>,
    /// (VNF, node, 0-based walk position if given).
    pub assign: Vec<(VnfId, NodeId, Option<usize>)>,
}

/// Dumped solutions keyed by flow id (`None` = rejected), plus server states.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolutionFile {
    pub flows: BTreeMap<usize, Option<FlowEntry>>,
    pub states: BTreeMap<NodeId, PowerState>,
}

/// Parse one or more solution dumps into `into`.
pub fn parse_solution(text: &str, network: &Network, into: &mut SolutionFile) -> Result<(), ParseError> {
    let n = network.node_count();
    let x = network.vnf_count();
    let mut current: Option<(usize, usize, Option<FlowEntry>, bool)> = None;
    let finish = |cur: Option<(usize, usize, Option<FlowEntry>, bool)>, into: &mut SolutionFile| {
        if let Some((ln, id, entry, rejected)) = cur {
            if into.flows.contains_key(&id) {
                return Err(err(ln, format!("flow {id} appears twice")));
            }
            match (entry, rejected) {
                (_, true) => into.flows.insert(id, None),
                (Some(e), false) => into.flows.insert(id, Some(e)),
                (None, false) => return Err(err(ln, format!("flow {id} has neither a walk nor `rejected`"))),
            };
        }
        Ok(())
    };
    for (ln, t) in lines(text) {
        match t[0] {
            "flow" => {
                arity(ln, &t, 2, 2)?;
                finish(current.take(), into)?;
                current = Some((ln, count(ln, t[1])?, None, false));
            }
            "walk" | "assign" | "rejected" => {
                let cur = current
                    .as_mut()
                    .ok_or_else(|| err(ln, format!("`{}` before any `flow` line", t[0])))?;
                match t[0] {
                    "walk" => {
                        arity(ln, &t, 3, usize::MAX)?;
                        if cur.2.is_some() {
                            return Err(err(ln, "second `walk` line for the same flow"));
                        }
                        let walk = t[1..]
                            .iter()
                            .map(|s| index(ln, s, n, "node"))
                            .collect::<Result<_, _>>()?;
                        cur.2 = Some(FlowEntry { walk, assign: Vec::new() });
                    }
                    "assign" => {
                        arity(ln, &t, 3, 4)?;
                        let entry = cur.2.as_mut().ok_or_else(|| err(ln, "`assign` before `walk`"))?;
                        let vnf = index(ln, t[1], x, "VNF")?;
                        let node = index(ln, t[2], n, "node")?;
                        let pos = match t.get(3) {
                            Some(s) => {
                                let p = index(ln, s, entry.walk.len(), "walk position")?;
                                if entry.walk[p] != node {
                                    return Err(err(ln, format!("walk position {} is not node {}", p + 1, node + 1)));
                                }
                                Some(p)
                            }
                            None => None,
                        };
                        entry.assign.push((vnf, node, pos));
                    }
                    _ => {
                        arity(ln, &t, 1, 1)?;
                        cur.3 = true;
                    }
                }
            }
            "state" => {
                arity(ln, &t, 3, 3)?;
                into.states.insert(index(ln, t[1], n, "node")?, power_state(ln, t[2])?);
            }
            other => return Err(err(ln, format!("unknown keyword `{other}`"))),
        }
    }
    finish(current.take(), into)
}

impl FlowEntry {
    /// Route with one service position per chain element, when the
    /// assignments describe one in chain order.
    pub fn route(&self, flow: &FlowSpec) -> Option<FlowRoute> {
        let mut service = Vec::with_capacity(flow.chain.len());
        let mut from = 0usize;
        for &vnf in &flow.chain {
            let mut hits = self.assign.iter().filter(|a| a.0 == vnf);
            let &(_, node, pos) = hits.next()?;
            if hits.next().is_some() {
                return None;
            }
            let at = match pos {
                Some(p) => p,
                None => (from..self.walk.len()).find(|&q| self.walk[q] == node)?,
            };
            if at < from {
                return None;
            }
            from = at;
            service.push(at);
        }
        if self.assign.iter().any(|a| !flow.chain.contains(&a.0)) {
            return None;
        }
        FlowRoute::new(self.walk.clone(), service).ok()
    }

    /// Matrix form built from the raw lines, so duplicated or misplaced
    /// assignments survive for the validator to flag.
    pub fn matrices(&self, network: &Network) -> Result<FlowMatrices, ModelError> {
        let n = network.node_count();
        let mut m = FlowMatrices::zeros(n, network.vnf_count());
        match routing_from_walk(&self.walk, &network.topology) {
            Ok((r, q)) => {
                m.r = r;
                m.q = q;
            }
            Err(ModelError::NotSimple(_)) => {
                for w in self.walk.windows(2) {
                    if !network.topology.has_link(w[0], w[1]) {
                        return Err(ModelError::NotALink { from: w[0], to: w[1] });
                    }
                    m.r[(w[0], w[1])] = 1;
                }
            }
            Err(e) => return Err(e),
        }
        for &(x, node, _) in &self.assign {
            m.u[(node, x)] = 1;
        }
        Ok(m)
    }
}

impl SolutionFile {
    /// Align with `flows`; flows absent from the file or without a usable
    /// route count as rejected. Missing server states fall back to `default_states`.
    pub fn to_allocation(&self, flows: &[FlowSpec], default_states: &[PowerState]) -> Allocation {
        let routes = flows
            .iter()
            .map(|f| self.flows.get(&f.id).and_then(|e| e.as_ref()).and_then(|e| e.route(f)))
            .collect();
        let server_states = default_states
            .iter()
            .enumerate()
            .map(|(i, &s)| self.states.get(&i).copied().unwrap_or(s))
            .collect();
        Allocation {
            routes,
            server_states,
        }
    }

    /// Matrix form of the carried flows (those with a walk), for validation.
    /// O^t marks servers dumped as ACTIVE, or the ones in use when no states
    /// were dumped.
    pub fn to_solution(
        &self,
        network: &Network,
        flows: &[FlowSpec],
    ) -> Result<(Vec<FlowSpec>, RoutingSolution), ModelError> {
        let mut kept = Vec::new();
        let mut mats = Vec::new();
        let mut routes = Vec::new();
        for f in flows {
            if let Some(Some(entry)) = self.flows.get(&f.id) {
                mats.push(entry.matrices(network)?);
                routes.push(entry.route(f));
                kept.push(f.clone());
            }
        }
        let mut sol = RoutingSolution {
            flows: mats,
            routes,
            next_state: vec![false; network.node_count()],
        };
        sol.next_state = if self.states.is_empty() {
            sol.used_servers(network.node_count())
        } else {
            (0..network.node_count())
                .map(|i| self.states.get(&i) == Some(&PowerState::Active))
                .collect()
        };
        Ok((kept, sol))
    }
}

pub fn write_flow_solution(flow: &FlowSpec, route: Option<&FlowRoute>) -> String {
    let mut out = format!("flow {}\n", flow.id);
    match route {
        None => out.push_str("rejected\n"),
        Some(r) => {
            let w: Vec<String> = r.walk().iter().map(|v| (v + 1).to_string()).collect();
            let _ = writeln!(out, "walk {}", w.join(" "));
            for (&pos, &x) in r.service().iter().zip(&flow.chain) {
                let _ = writeln!(out, "assign {} {} {}", x + 1, r.walk()[pos] + 1, pos + 1);
            }
        }
    }
    out
}

pub fn write_server_states(states: &[PowerState]) -> String {
    states
        .iter()
        .enumerate()
        .map(|(i, &s)| format!("state {} {}\n", i + 1, state_name(s)))
        .collect()
}
