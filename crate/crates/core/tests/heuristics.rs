mod common;

use proptest::prelude::*;

use common::*;
use sfc_core::exact::{solve_energy_sfra, SolverConfig};
use sfc_core::formulation::{objective_value, validate, ValidationOptions};
use sfc_core::heuristics::{apply_placements, lt_ensf, nsf, rrr, st_ensf, HeuristicError};
use sfc_core::model::{
    FlowRoute, FlowSpec, Horizon, Network, NetworkState, PlacementLimits, PowerState,
    ProblemMode, RoutingSolution, ServerSpec, Topology, VnfCatalog,
};

fn line(n: usize) -> Topology {
    let mut t = Topology::new(n);
    for i in 0..n - 1 {
        t.add_bidirectional(i, i + 1, 1.0, 1.0).unwrap();
    }
    t
}

fn server(energy: f64, supported: Vec<bool>, state: PowerState) -> ServerSpec {
    ServerSpec {
        capacity: 1.0,
        energy,
        supported,
        state,
        idle_fraction: 0.6,
    }
}

#[test]
fn st_ensf_prefers_a_server_already_in_use() {
    // VNF 1 only at node 3; VNF 0 also at node 1, which is closer and cheaper.
    let servers = vec![
        ServerSpec::absent(2),
        server(100.0, vec![true, false], PowerState::Idle),
        ServerSpec::absent(2),
        server(400.0, vec![true, true], PowerState::Idle),
    ];
    let net = Network::new(line(4), servers, VnfCatalog::uniform(2, 1.0).unwrap()).unwrap();
    let flows = vec![
        FlowSpec::new(1, 0, 3, 0.3, vec![1]),
        FlowSpec::new(2, 0, 3, 0.3, vec![0]),
    ];
    let out = st_ensf(&net, &NetworkState::empty(&net), &flows).unwrap();
    let second = out.allocation.routes[1].as_ref().unwrap();
    assert_eq!(second.servers().into_iter().collect::<Vec<_>>(), vec![3]);

    // Alone, the second flow goes to the cheaper IDLE server.
    let alone = st_ensf(&net, &NetworkState::empty(&net), &flows[1..]).unwrap();
    let r = alone.allocation.routes[0].as_ref().unwrap();
    assert_eq!(r.servers().into_iter().collect::<Vec<_>>(), vec![1]);
    assert_eq!(alone.allocation.server_states[3], PowerState::Idle);
}

#[test]
fn only_off_hosts_need_the_long_term_variant() {
    let servers = vec![
        ServerSpec::absent(1),
        server(300.0, vec![true], PowerState::Off),
        ServerSpec::absent(1),
    ];
    let net = Network::new(line(3), servers, VnfCatalog::uniform(1, 1.0).unwrap()).unwrap();
    let flows = vec![FlowSpec::new(1, 0, 2, 0.5, vec![0])];
    let state = NetworkState::empty(&net);
    let st = st_ensf(&net, &state, &flows).unwrap();
    assert_eq!(st.allocation.routes[0], None);
    assert_eq!(
        st.failures,
        vec![HeuristicError::AllocationFailed { flow: 1, index: 0, vnf: 0 }]
    );
    assert_eq!(st.allocation.server_states[1], PowerState::Off);

    let lt = lt_ensf(&net, &state, &flows).unwrap();
    assert!(lt.failures.is_empty());
    assert_eq!(lt.allocation.routes[0].as_ref().unwrap().walk(), &[0, 1, 2]);
    assert_eq!(lt.allocation.server_states[1], PowerState::Active);
}

#[test]
fn all_off_turns_on_exactly_the_anchors() {
    let (mut net, flows) = example();
    for s in &mut net.servers {
        s.state = PowerState::Off;
    }
    let state = NetworkState::empty(&net);
    let out = lt_ensf(&net, &state, &flows).unwrap();
    let r = out.allocation.routes[0].as_ref().unwrap();
    let anchors = r.servers();
    for (i, s) in out.allocation.server_states.iter().enumerate() {
        assert_eq!(*s == PowerState::Active, anchors.contains(&i), "node {i}");
        assert!(*s != PowerState::Idle);
    }
    let (kept, sol) = out.allocation.to_solution(&net, &flows).unwrap();
    let rep = validate(&net, &state, &kept, &sol, &ValidationOptions::new(ProblemMode::Grr(Horizon::LongTerm))).unwrap();
    assert!(rep.is_feasible(), "{:?}", rep.violations());
}

#[test]
fn placement_cap_skips_a_full_server() {
    // Nodes 1 and 2 are OFF and host nothing useful; node 1 is nearer but full.
    let servers = vec![
        ServerSpec::absent(3),
        server(300.0, vec![false, true, true], PowerState::Off),
        server(300.0, vec![false, false, false], PowerState::Off),
        ServerSpec::absent(3),
    ];
    let net = Network::new(line(4), servers, VnfCatalog::uniform(3, 1.0).unwrap())
        .unwrap()
        .with_placement(PlacementLimits {
            eligible: vec![false, true, true, false],
            max_types: 2,
        })
        .unwrap();
    let flows = vec![FlowSpec::new(1, 0, 3, 0.3, vec![0])];
    let out = lt_ensf(&net, &NetworkState::empty(&net), &flows).unwrap();
    assert_eq!(out.placements, vec![(2, 0)]);
    let r = out.allocation.routes[0].as_ref().unwrap();
    assert_eq!(r.servers().into_iter().collect::<Vec<_>>(), vec![2]);
    assert_eq!(out.allocation.server_states[1], PowerState::Off);

    let mut placed = net.clone();
    apply_placements(&mut placed, &out.placements);
    assert!(placed.servers[2].supports(0));
}

#[test]
fn rrr_of_one_flow_is_energy_sfra() {
    let (net, flows) = example();
    let state = NetworkState::empty(&net);
    let cfg = SolverConfig::new(ProblemMode::EnergySfra(Horizon::ShortTerm));
    let out = rrr(&net, &state, &flows, &cfg).unwrap();
    let direct = solve_energy_sfra(&net, &state, &flows[0], &cfg).unwrap();
    assert_eq!(out.allocation.routes, direct.allocation.routes);
}

#[test]
fn rrr_shares_a_server_between_flows() {
    let servers = vec![
        ServerSpec::absent(1),
        server(300.0, vec![true], PowerState::Off),
        ServerSpec::absent(1),
    ];
    let net = Network::new(line(3), servers, VnfCatalog::uniform(1, 1.0).unwrap()).unwrap();
    let flows = vec![
        FlowSpec::new(1, 0, 2, 0.4, vec![0]),
        FlowSpec::new(2, 2, 0, 0.4, vec![0]),
    ];
    let state = NetworkState::empty(&net);
    let cfg = SolverConfig::new(ProblemMode::EnergySfra(Horizon::LongTerm));
    let out = rrr(&net, &state, &flows, &cfg).unwrap();
    assert!(out.failures.is_empty());
    let (kept, sol) = out.allocation.to_solution(&net, &flows).unwrap();
    let energy = objective_value(&net, &state, &kept, &sol, ProblemMode::EnergySfra(Horizon::LongTerm), 0.0).unwrap();
    assert_eq!(energy, 300.0);
}

/// Sequential oracle: for each flow, brute-force the new energy against the
/// loads and servers left by the routes 3R chose for the flows before it, and
/// compare with the value of 3R's own choice.
fn check_sequential(net: &Network, flows: &[FlowSpec], horizon: Horizon, chosen: &[Option<FlowRoute>]) -> Result<(), String> {
    let mode = ProblemMode::EnergySfra(horizon);
    let original = net.initial_states();
    let mut state = NetworkState::empty(net);
    let mut used = vec![false; net.node_count()];
    for (k, f) in flows.iter().enumerate() {
        state.server_states = original
            .iter()
            .zip(&used)
            .map(|(&s, &u)| horizon.settle(u, s))
            .collect();
        let oracle = brute_force(net, &state, std::slice::from_ref(f), mode, 0.0).map(|(v, _)| v);
        match (&chosen[k], oracle) {
            (None, None) => {}
            (Some(r), Some(v)) => {
                let mut next = vec![false; net.node_count()];
                for (node, _) in r.assignment(&f.chain) {
                    next[node] = true;
                }
                let sol = RoutingSolution::from_routes(net, std::slice::from_ref(f), std::slice::from_ref(r), next.clone()).unwrap();
                let got = objective_value(net, &state, std::slice::from_ref(f), &sol, mode, 0.0).unwrap();
                if (got - v).abs() > 1e-9 {
                    return Err(format!("flow {k}: 3R {got}, oracle {v}"));
                }
                state.add_route(net, f, r, f.rate.unwrap());
                for (u, n) in used.iter_mut().zip(next) {
                    *u |= n;
                }
            }
            (a, b) => return Err(format!("flow {k}: 3R {:?}, oracle {:?}", a.is_some(), b)),
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn rrr_matches_sequential_oracle(seed in 0u64..5_000, n in 3usize..6, long in any::<bool>()) {
        let net = random_network(seed, n, 2);
        let flows = random_flows(seed, &net, 3, 2);
        let horizon = if long { Horizon::LongTerm } else { Horizon::ShortTerm };
        let mode = ProblemMode::EnergySfra(horizon);
        let out = rrr(&net, &NetworkState::empty(&net), &flows, &SolverConfig::new(mode)).unwrap();
        let checked = check_sequential(&net, &flows, horizon, &out.allocation.routes);
        prop_assert!(checked.is_ok(), "{:?}", checked);
    }

    #[test]
    fn ensf_outputs_validate(seed in 0u64..5_000, n in 3usize..8, count in 1usize..6, long in any::<bool>()) {
        let mut net = random_network(seed, n, 3);
        if long {
            let n = net.node_count();
            net = net.with_placement(PlacementLimits { eligible: vec![true; n], max_types: 2 }).unwrap();
        }
        let flows = random_flows(seed, &net, count, 3);
        let state = NetworkState::empty(&net);
        let (out, horizon) = if long {
            (lt_ensf(&net, &state, &flows).unwrap(), Horizon::LongTerm)
        } else {
            (st_ensf(&net, &state, &flows).unwrap(), Horizon::ShortTerm)
        };
        prop_assert_eq!(out.failures.len(), out.allocation.rejected_count());
        let again = if long { lt_ensf(&net, &state, &flows).unwrap() } else { st_ensf(&net, &state, &flows).unwrap() };
        prop_assert_eq!(&again, &out);
        for r in out.allocation.routes.iter().flatten() {
            prop_assert!(r.is_simple());
        }
        let mut placed = net.clone();
        apply_placements(&mut placed, &out.placements);
        let (kept, sol) = out.allocation.to_solution(&placed, &flows).unwrap();
        let rep = validate(&placed, &state, &kept, &sol, &ValidationOptions::new(ProblemMode::Grr(horizon))).unwrap();
        prop_assert!(rep.is_feasible(), "{:?}", rep.violations());
    }

    #[test]
    fn nsf_walks_validate_per_segment(seed in 0u64..5_000, n in 3usize..8) {
        let net = random_network(seed, n, 3);
        let flows = random_flows(seed, &net, 1, 3);
        let state = NetworkState::empty(&net);
        let rate = flows[0].rate.unwrap();
        if let Ok(w) = nsf(&net, &state, &flows[0], rate) {
            for seg in &w.segments {
                let mut s = seg.clone();
                s.sort_unstable();
                s.dedup();
                prop_assert_eq!(s.len(), seg.len());
            }
            let route = w.to_route().unwrap();
            let mut used = vec![false; net.node_count()];
            for (node, _) in route.assignment(&flows[0].chain) {
                used[node] = true;
            }
            let sol = RoutingSolution::from_routes(&net, &flows, &[route], used).unwrap();
            let opts = ValidationOptions::new(ProblemMode::Sfra).walk_mode(true);
            let rep = validate(&net, &state, &flows, &sol, &opts).unwrap();
            prop_assert!(rep.is_feasible(), "{:?}", rep.violations());
        }
    }
}
