#![allow(dead_code)]

use std::collections::HashMap;

use lp_parser_rs::model::{ComparisonOp, Constraint, Sense};
use lp_parser_rs::{LpProblem, VariableKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sfc_core::formulation::{objective_value, validate, ValidationOptions};
use sfc_core::io::{parse_scenario, parse_topology};
use sfc_core::model::{
    FlowRoute, FlowSpec, Network, NetworkState, PowerState, ProblemMode, RoutingSolution,
    ServerSpec, Topology, VnfCatalog,
};

pub const EXAMPLE_TOPOLOGY: &str = include_str!("../../data/example/topology.txt");
pub const EXAMPLE_SCENARIO: &str = include_str!("../../data/example/scenario.txt");
pub const EXAMPLE_SOLUTION: &str = include_str!("../../data/example/solution.txt");

pub fn example() -> (Network, Vec<FlowSpec>) {
    let net = parse_topology(EXAMPLE_TOPOLOGY).unwrap();
    let sc = parse_scenario(EXAMPLE_SCENARIO, &net).unwrap();
    (net, sc.flows)
}

/// Objective of an LP file solved with microlp, constant included.
/// `None` when microlp reports infeasibility.
pub fn solve_lp_text(text: &str) -> Option<f64> {
    let lp = LpProblem::parse(text).expect("LP text parses");
    assert_eq!(lp.sense, Sense::Minimize);
    let dir = microlp::OptimizationDirection::Minimize;
    let mut p = microlp::Problem::new(dir);
    let mut obj: HashMap<String, f64> = HashMap::new();
    let mut constant = 0.0;
    for o in lp.objectives.values() {
        constant += o.constant;
        for c in &o.coefficients {
            *obj.entry(lp.interner.resolve(c.name).to_string()).or_default() += c.value;
        }
    }
    let mut vars = HashMap::new();
    for (id, v) in &lp.variables {
        let name = lp.interner.resolve(*id).to_string();
        let c = obj.get(&name).copied().unwrap_or(0.0);
        let var = match v.kind {
            VariableKind::Binary => p.add_binary_var(c),
            VariableKind::General | VariableKind::Integer => {
                let lo = v.bounds.lower.unwrap_or(0.0).max(0.0) as i32;
                let hi = v.bounds.upper.map(|u| u as i32).unwrap_or(1000);
                p.add_integer_var(c, (lo, hi))
            }
            _ => p.add_var(
                c,
                (
                    v.bounds.lower.unwrap_or(0.0),
                    v.bounds.upper.unwrap_or(f64::INFINITY),
                ),
            ),
        };
        vars.insert(name, var);
    }
    for c in lp.constraints.values() {
        if let Constraint::Standard {
            coefficients,
            operator,
            rhs,
            ..
        } = c
        {
            let terms: Vec<_> = coefficients
                .iter()
                .map(|k| (vars[lp.interner.resolve(k.name)], k.value))
                .collect();
            let op = match operator {
                ComparisonOp::LTE | ComparisonOp::LT => microlp::ComparisonOp::Le,
                ComparisonOp::GTE | ComparisonOp::GT => microlp::ComparisonOp::Ge,
                ComparisonOp::EQ => microlp::ComparisonOp::Eq,
            };
            p.add_constraint(&terms, op, *rhs);
        }
    }
    match p.solve() {
        Ok(microlp::SolveOutcome::Solution(sol)) => Some(sol.objective() + constant),
        Ok(microlp::SolveOutcome::Interrupted(_)) => panic!("microlp interrupted"),
        Err(microlp::Error::Infeasible) => None,
        Err(e) => panic!("microlp failed: {e:?}"),
    }
}

/// Simple s–d paths, no pruning, in discovery order.
pub fn all_simple_paths(topo: &Topology, s: usize, d: usize) -> Vec<Vec<usize>> {
    fn go(topo: &Topology, d: usize, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let here = *path.last().unwrap();
        if here == d {
            out.push(path.clone());
            return;
        }
        for &n in topo.successors(here) {
            if !path.contains(&n) {
                path.push(n);
                go(topo, d, path, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    go(topo, d, &mut vec![s], &mut out);
    out
}

/// Every nondecreasing position vector of length k over a path of length len.
pub fn monotone_positions(len: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        let mut next = Vec::new();
        for v in &out {
            let from = v.last().copied().unwrap_or(0);
            for p in from..len {
                let mut w = v.clone();
                w.push(p);
                next.push(w);
            }
        }
        out = next;
    }
    out
}

/// All routes of one flow, feasible or not.
pub fn all_routes(net: &Network, flow: &FlowSpec) -> Vec<FlowRoute> {
    let mut out = Vec::new();
    for path in all_simple_paths(&net.topology, flow.source, flow.destination) {
        for pos in monotone_positions(path.len(), flow.chain.len()) {
            out.push(FlowRoute::new(path.clone(), pos).unwrap());
        }
    }
    out
}

/// Minimum objective over every combination of routes that the validator
/// accepts, with O set to the servers in use. `None` if nothing is feasible.
pub fn brute_force(
    net: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    mode: ProblemMode,
    alpha: f64,
) -> Option<(f64, Vec<FlowRoute>)> {
    let options: Vec<Vec<FlowRoute>> = flows.iter().map(|f| all_routes(net, f)).collect();
    let opts = ValidationOptions::new(mode);
    let mut best: Option<(f64, Vec<FlowRoute>)> = None;
    let mut idx = vec![0usize; flows.len()];
    if options.iter().any(|o| o.is_empty()) {
        return None;
    }
    loop {
        let pick: Vec<FlowRoute> = idx.iter().zip(&options).map(|(&i, o)| o[i].clone()).collect();
        let mut used = vec![false; net.node_count()];
        for (r, f) in pick.iter().zip(flows) {
            for (node, _) in r.assignment(&f.chain) {
                used[node] = true;
            }
        }
        let sol = RoutingSolution::from_routes(net, flows, &pick, used).unwrap();
        let rep = validate(net, state, flows, &sol, &opts).unwrap();
        if rep.is_feasible() {
            let v = objective_value(net, state, flows, &sol, mode, alpha).unwrap();
            if best.as_ref().is_none_or(|(b, _)| v < *b - 1e-12) {
                best = Some((v, pick));
            }
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return best;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// A small random connected symmetric network. Every node hosts a server
/// with a random subset of VNF types and a random power state.
pub fn random_network(seed: u64, n: usize, vnfs: usize) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut topo = Topology::new(n);
    for i in 1..n {
        let j = rng.random_range(0..i);
        let cap = rng.random_range(1..=3) as f64;
        topo.add_bidirectional(j, i, cap, 1.0).unwrap();
    }
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j && !topo.has_link(i, j) {
            let cap = rng.random_range(1..=3) as f64;
            topo.add_bidirectional(i, j, cap, 1.0).unwrap();
        }
    }
    let servers = (0..n)
        .map(|_| {
            let supported: Vec<bool> = (0..vnfs).map(|_| rng.random_bool(0.5)).collect();
            let state = match rng.random_range(0..3) {
                0 => PowerState::Off,
                1 => PowerState::Idle,
                _ => PowerState::Active,
            };
            ServerSpec {
                capacity: rng.random_range(1..=3) as f64,
                energy: rng.random_range(2..=4) as f64 * 100.0,
                supported,
                state,
                idle_fraction: 0.6,
            }
        })
        .collect();
    Network::new(topo, servers, VnfCatalog::uniform(vnfs, 1.0).unwrap()).unwrap()
}

pub fn random_flows(seed: u64, net: &Network, count: usize, max_chain: usize) -> Vec<FlowSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let n = net.node_count();
    (0..count)
        .map(|id| {
            let s = rng.random_range(0..n);
            let mut d = rng.random_range(0..n);
            while d == s {
                d = rng.random_range(0..n);
            }
            let len = rng.random_range(0..=max_chain.min(net.vnf_count()));
            let mut types: Vec<usize> = (0..net.vnf_count()).collect();
            for k in (1..types.len()).rev() {
                types.swap(k, rng.random_range(0..=k));
            }
            types.truncate(len);
            let rate = rng.random_range(1..=10) as f64 / 10.0;
            FlowSpec::new(id + 1, s, d, rate, types)
        })
        .collect()
}
