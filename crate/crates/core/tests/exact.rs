mod common;

use proptest::prelude::*;

use common::*;
use sfc_core::exact::lp::row_count;
use sfc_core::exact::{export_lp, solve, SolveStatus, SolverConfig};
use sfc_core::formulation::{validate, ValidationOptions};
use sfc_core::io::{parse_solution, SolutionFile};
use sfc_core::model::{
    route_difference, FlowRoute, FlowSpec, Horizon, Network, NetworkState, PowerState,
    ProblemMode, ServerSpec, Topology, UtilizationCaps, VnfCatalog,
};

fn sfra() -> SolverConfig {
    SolverConfig::new(ProblemMode::Sfra)
}

#[test]
fn worked_example_route() {
    let (net, flows) = example();
    let state = NetworkState::empty(&net);
    let res = solve(&net, &state, &flows, &sfra()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let route = res.allocation.routes[0].as_ref().unwrap();
    assert_eq!(route.walk(), &[0, 2, 4, 3, 1]);
    assert_eq!(route.service(), &[0, 3]);
    assert_eq!(res.objective, 4.0);

    let mut file = SolutionFile::default();
    parse_solution(EXAMPLE_SOLUTION, &net, &mut file).unwrap();
    let dumped = file.flows[&1].as_ref().unwrap().route(&flows[0]).unwrap();
    assert_eq!(&dumped, route);

    let rep = validate(&net, &state, &flows, res.solution.as_ref().unwrap(), &ValidationOptions::new(ProblemMode::Sfra)).unwrap();
    assert!(rep.is_feasible(), "{:?}", rep.violations());
}

#[test]
fn empty_chain_takes_the_direct_link() {
    let (net, _) = example();
    let flows = vec![FlowSpec::new(1, 0, 1, 0.3, vec![])];
    let res = solve(&net, &NetworkState::empty(&net), &flows, &sfra()).unwrap();
    assert_eq!(res.allocation.routes[0].as_ref().unwrap().walk(), &[0, 1]);
    assert_eq!(res.objective, 1.0);
}

#[test]
fn tight_delay_budget_is_infeasible() {
    let (net, mut flows) = example();
    flows[0] = flows[0].clone().with_budget(2.0);
    let res = solve(&net, &NetworkState::empty(&net), &flows, &sfra()).unwrap();
    assert_eq!(res.status, SolveStatus::Infeasible);
    assert!(res.allocation.routes[0].is_none());
    assert!(res.objective.is_infinite());
}

#[test]
fn saturated_link_forces_detour_or_rejection() {
    let (net, flows) = example();
    let mut state = NetworkState::empty(&net);
    state.load[(3, 1)] = 0.8;
    let res = solve(&net, &state, &flows, &sfra()).unwrap();
    assert_eq!(res.status, SolveStatus::Infeasible);
}

#[test]
fn unknown_rate_needs_stand_in() {
    let (net, mut flows) = example();
    flows[0].rate = None;
    let state = NetworkState::empty(&net);
    assert!(solve(&net, &state, &flows, &sfra()).is_err());
    let mut cfg = sfra();
    cfg.stand_in_rate = Some(0.5);
    assert_eq!(solve(&net, &state, &flows, &cfg).unwrap().objective, 4.0);
    let energy = SolverConfig::new(ProblemMode::EnergySfra(Horizon::ShortTerm));
    assert!(solve(&net, &state, &flows, &energy).is_err());
}

fn triangle() -> Network {
    let mut t = Topology::new(3);
    t.add_bidirectional(0, 1, 1.0, 1.0).unwrap();
    t.add_bidirectional(1, 2, 1.0, 1.0).unwrap();
    t.add_bidirectional(0, 2, 1.0, 1.0).unwrap();
    let srv = |energy: f64| ServerSpec {
        capacity: 1.0,
        energy,
        supported: vec![true],
        state: PowerState::Idle,
        idle_fraction: 0.6,
    };
    let servers = vec![ServerSpec::absent(1), srv(200.0), srv(300.0)];
    Network::new(t, servers, VnfCatalog::uniform(1, 1.0).unwrap()).unwrap()
}

#[test]
fn energy_model_prefers_the_cheaper_server() {
    let net = triangle();
    let flows = vec![FlowSpec::new(1, 0, 2, 0.5, vec![0])];
    let state = NetworkState::empty(&net);
    let plain = solve(&net, &state, &flows, &sfra()).unwrap();
    assert_eq!(plain.allocation.routes[0].as_ref().unwrap().walk(), &[0, 2]);

    let cfg = SolverConfig::new(ProblemMode::EnergySfra(Horizon::ShortTerm));
    let res = solve(&net, &state, &flows, &cfg).unwrap();
    let route = res.allocation.routes[0].as_ref().unwrap();
    assert_eq!(route.walk(), &[0, 1, 2]);
    assert_eq!(route.servers().into_iter().collect::<Vec<_>>(), vec![1]);
    assert!((res.objective - 0.4 * 200.0).abs() < 1e-9);
    assert_eq!(res.allocation.server_states[1], PowerState::Active);
}

#[test]
fn short_term_cannot_wake_an_off_server() {
    let mut net = triangle();
    net.servers[1].state = PowerState::Off;
    net.servers[2].state = PowerState::Off;
    let flows = vec![FlowSpec::new(1, 0, 2, 0.5, vec![0])];
    let state = NetworkState::empty(&net);
    let st = SolverConfig::new(ProblemMode::EnergySfra(Horizon::ShortTerm));
    assert_eq!(solve(&net, &state, &flows, &st).unwrap().status, SolveStatus::Infeasible);
    let lt = SolverConfig::new(ProblemMode::EnergySfra(Horizon::LongTerm));
    let res = solve(&net, &state, &flows, &lt).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert_eq!(res.objective, 200.0);
}

#[test]
fn grr_keeps_installed_routes_when_alpha_is_one() {
    let (net, flows) = example();
    let installed = FlowRoute::new(vec![0, 2, 4, 3, 1], vec![0, 3]).unwrap();
    let state = NetworkState::from_routes(
        &net,
        &flows,
        vec![Some(installed.clone())],
        &[0.3],
        net.initial_states(),
        UtilizationCaps::default(),
    )
    .unwrap();
    let cfg = SolverConfig::new(ProblemMode::Grr(Horizon::ShortTerm)).with_alpha(1.0);
    let res = solve(&net, &state, &flows, &cfg).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    assert_eq!(res.objective, 0.0);
    assert_eq!(res.allocation.routes[0].as_ref(), Some(&installed));
}

#[test]
fn overhead_can_exceed_n_minus_one_per_flow() {
    let mut t = Topology::new(4);
    for i in 0..4 {
        for j in i + 1..4 {
            t.add_bidirectional(i, j, 1.0, 1.0).unwrap();
        }
    }
    let m = FlowRoute::new(vec![0, 1, 2, 3], vec![]).unwrap();
    let r = FlowRoute::new(vec![0, 2, 1, 3], vec![]).unwrap();
    let diff = route_difference(Some(&r), Some(&m));
    assert_eq!(diff, 6);
    assert!(diff > 3);
    assert!(diff <= 2 * 3);
}

/// Rows the exporter must emit for one instance.
fn expected_rows(net: &Network, flows: &[FlowSpec], mode: ProblemMode) -> usize {
    let n = net.node_count();
    let x = net.vnf_count();
    let l = net.topology.link_count();
    let mut rows = 0;
    for f in flows {
        let out_d = net.topology.successors(f.destination).len();
        let k = f.chain.len();
        rows += x + (n - 1) * x + n * x + x;
        rows += n + n;
        if f.delay_budget.is_finite() {
            rows += 1;
        }
        rows += l + out_d + (n - 2) + 1 + 1 + (l - out_d);
        rows += k * k.saturating_sub(1) / 2 * n * n;
    }
    rows += n + l;
    if mode.is_energy_aware() {
        rows += 2 * n;
    }
    rows
}

#[test]
fn lp_export_of_worked_example() {
    let (net, flows) = example();
    let state = NetworkState::empty(&net);
    for mode in [
        ProblemMode::Sfra,
        ProblemMode::EnergySfra(Horizon::ShortTerm),
        ProblemMode::Grr(Horizon::LongTerm),
    ] {
        let cfg = SolverConfig::new(mode).with_alpha(0.5);
        let text = export_lp(&net, &state, &flows, &cfg).unwrap();
        assert_eq!(row_count(&text), expected_rows(&net, &flows, mode), "{mode:?}");
        let exact = solve(&net, &state, &flows, &cfg).unwrap().objective;
        let lp = solve_lp_text(&text).unwrap();
        assert!((lp - exact).abs() < 1e-6, "{mode:?}: lp {lp} exact {exact}");
    }
}

#[test]
fn lp_export_keeps_objective_constant() {
    let (net, flows) = example();
    let installed = FlowRoute::new(vec![0, 1], vec![]).unwrap();
    let state = NetworkState::from_routes(&net, &flows, vec![Some(installed)], &[0.3], net.initial_states(), UtilizationCaps::default()).unwrap();
    let cfg = SolverConfig::new(ProblemMode::Grr(Horizon::ShortTerm)).with_alpha(1.0);
    let text = export_lp(&net, &state, &flows, &cfg).unwrap();
    let lp = lp_parser_rs::LpProblem::parse(&text).unwrap();
    let constant: f64 = lp.objectives.values().map(|o| o.constant).sum();
    assert!((constant - 1.0 / 4.0).abs() < 1e-12);
    let exact = solve(&net, &state, &flows, &cfg).unwrap();
    // Installed 1→2 against 1→3→5→4→2: five links differ, normalized by 4.
    assert!((exact.objective - 5.0 / 4.0).abs() < 1e-12);
    assert!((solve_lp_text(&text).unwrap() - exact.objective).abs() < 1e-6);
}

fn modes() -> impl Strategy<Value = ProblemMode> {
    prop_oneof![
        Just(ProblemMode::Sfra),
        Just(ProblemMode::EnergySfra(Horizon::ShortTerm)),
        Just(ProblemMode::EnergySfra(Horizon::LongTerm)),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_flow_matches_brute_force(seed in 0u64..10_000, n in 3usize..6, mode in modes()) {
        let net = random_network(seed, n, 3);
        let flows = random_flows(seed, &net, 1, 3);
        let state = NetworkState::empty(&net);
        let res = solve(&net, &state, &flows, &SolverConfig::new(mode)).unwrap();
        let oracle = brute_force(&net, &state, &flows, mode, 0.0);
        match oracle {
            None => prop_assert_eq!(res.status, SolveStatus::Infeasible),
            Some((v, _)) => {
                prop_assert_eq!(res.status, SolveStatus::Optimal);
                prop_assert!((res.objective - v).abs() < 1e-9, "solver {} oracle {}", res.objective, v);
                let rep = validate(&net, &state, &flows, res.solution.as_ref().unwrap(), &ValidationOptions::new(mode)).unwrap();
                prop_assert!(rep.is_feasible());
            }
        }
    }

    #[test]
    fn grr_matches_brute_force(
        seed in 0u64..10_000,
        n in 3usize..5,
        count in 1usize..3,
        alpha in prop_oneof![Just(0.0), Just(0.5), Just(1.0), 0.0f64..1.0],
        long in any::<bool>(),
        keep in any::<u64>(),
    ) {
        let net = random_network(seed, n, 2);
        let flows = random_flows(seed, &net, count, 2);
        let horizon = if long { Horizon::LongTerm } else { Horizon::ShortTerm };
        let mode = ProblemMode::Grr(horizon);
        // Installed routes: arbitrary routes of each flow, some absent.
        let installed: Vec<Option<FlowRoute>> = flows
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let all = all_routes(&net, f);
                if all.is_empty() || (keep >> (2 * k)) & 3 == 0 {
                    None
                } else {
                    Some(all[(keep as usize >> 8) % all.len()].clone())
                }
            })
            .collect();
        let rates: Vec<f64> = flows.iter().map(|f| f.rate.unwrap()).collect();
        let state = NetworkState::from_routes(&net, &flows, installed, &rates, net.initial_states(), UtilizationCaps::default()).unwrap();
        let cfg = SolverConfig::new(mode).with_alpha(alpha);
        let res = solve(&net, &state, &flows, &cfg).unwrap();
        match brute_force(&net, &state, &flows, mode, alpha) {
            None => prop_assert_eq!(res.status, SolveStatus::Infeasible),
            Some((v, _)) => {
                prop_assert_eq!(res.status, SolveStatus::Optimal);
                prop_assert!((res.objective - v).abs() < 1e-9, "solver {} oracle {}", res.objective, v);
            }
        }
    }
}
