use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use sfc_core::model::{FlowSpec, PowerState, Topology};
use sfc_core::trafficgen::{
    abilene, build_network, endpoint_sets, evolve_rates, generate_flows, generate_hosting,
    generate_n_flows, generate_scenario, preset, rng_from_seed, GenError, GenParams,
};

fn complete(n: usize) -> Topology {
    let mut t = Topology::new(n);
    for i in 0..n {
        for j in i + 1..n {
            t.add_bidirectional(i, j, 1.0, 1.0).unwrap();
        }
    }
    t
}

fn params() -> GenParams {
    let mut p = preset(1).unwrap();
    p.gamma = 1.0;
    p.x_gamma = 1.0;
    p
}

#[test]
fn full_hosting() {
    let h = generate_hosting(5, &params(), &mut rng_from_seed(3)).unwrap();
    assert!(h.eligible.iter().all(|&e| e));
    assert!(h.supported.iter().all(|row| row.iter().all(|&b| b)));
}

#[test]
fn scenario_five_hosting_on_abilene() {
    let p = preset(5).unwrap();
    let h = generate_hosting(11, &p, &mut rng_from_seed(11)).unwrap();
    assert_eq!(h.eligible.iter().filter(|&&e| e).count(), 6);
    for (i, row) in h.supported.iter().enumerate() {
        let hosted = row.iter().filter(|&&b| b).count();
        assert_eq!(hosted, if h.eligible[i] { 7 } else { 0 });
    }
    for t in 0..10 {
        assert!(h.supported.iter().any(|row| row[t]));
    }
}

#[test]
fn pigeonhole_is_uncoverable() {
    let mut p = params();
    p.gamma = 0.1;
    p.x_gamma = 0.5;
    assert!(matches!(
        generate_hosting(5, &p, &mut rng_from_seed(1)),
        Err(GenError::Uncoverable { eligible: 1, per_server: 5, types: 10 })
    ));
}

#[test]
fn all_switches_are_endpoints() {
    let (s, d) = endpoint_sets(5, &params(), &mut rng_from_seed(0));
    assert_eq!(s, vec![0, 1, 2, 3, 4]);
    assert_eq!(d, vec![0, 1, 2, 3, 4]);
}

#[test]
fn mean_rate_is_b_f_times_capacity() {
    let mut p = params();
    p.b_f = 0.3;
    let flows = generate_n_flows(&complete(5), &p, 100_000, &mut rng_from_seed(42)).unwrap();
    let rates: Vec<f64> = flows.iter().map(|f| f.rate.unwrap()).collect();
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 0.3).abs() <= 0.02 * 0.3, "mean {mean}");
    assert!(rates.iter().all(|&r| r > 0.0 && r < 0.6));
}

#[test]
fn flow_counts_follow_the_clipped_geometric_law() {
    let p = params();
    let topo = complete(5);
    let mut hist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut samples = 0;
    let mut rng = rng_from_seed(7);
    while samples < 100_000 {
        let flows = generate_flows(&topo, &p, &mut rng).unwrap();
        let mut per_source = [0usize; 5];
        for f in &flows {
            per_source[f.source] += 1;
        }
        for c in per_source {
            *hist.entry(c).or_default() += 1;
            samples += 1;
        }
    }
    // p = 1/(β·N_d) = 0.5, clipped at F_m = 10.
    let q: f64 = 0.5;
    let pmf = |k: usize| if k < 10 { q.powi(k as i32 - 1) * 0.5 } else { q.powi(9) };
    let mut chi2 = 0.0;
    for k in 1..=10 {
        let expected = pmf(k) * samples as f64;
        let observed = *hist.get(&k).unwrap_or(&0) as f64;
        chi2 += (observed - expected).powi(2) / expected;
    }
    assert_eq!(hist.keys().copied().filter(|&k| k == 0 || k > 10).count(), 0);
    let critical = ChiSquared::new(9.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
}

#[test]
fn evolve_rates_grows_by_up_to_twenty_percent() {
    let flows: Vec<FlowSpec> = (0..50_000).map(|k| FlowSpec::new(k + 1, 0, 1, 1.0, vec![])).collect();
    let grown = evolve_rates(&flows, &mut rng_from_seed(9));
    let rates: Vec<f64> = grown.iter().map(|f| f.rate.unwrap()).collect();
    assert!(rates.iter().all(|&r| r > 1.0 && r <= 1.2));
    let mean = rates.iter().sum::<f64>() / rates.len() as f64;
    assert!((mean - 1.1).abs() < 0.002, "mean {mean}");
    assert_eq!(evolve_rates(&flows, &mut rng_from_seed(9)), grown);
    assert!(evolve_rates(&[], &mut rng_from_seed(9)).is_empty());
}

#[test]
fn abilene_servers() {
    let p = preset(1).unwrap();
    let topo = abilene();
    let h = generate_hosting(11, &p, &mut rng_from_seed(1)).unwrap();
    let net = build_network(topo, &h, &p, PowerState::Active).unwrap();
    for (i, s) in net.servers.iter().enumerate() {
        let degree = net.topology.predecessors(i).len() as f64;
        assert!((s.capacity - 0.1 * degree).abs() < 1e-12);
        // Degrees are 2 or 3, so energies sit at the two ends of the range.
        let expect = if degree == 3.0 { 400.0 } else { 200.0 };
        assert!((s.energy - expect).abs() < 1e-9, "node {i}");
    }
}

#[test]
fn scenario_generation_is_deterministic() {
    let p = preset(2).unwrap();
    let a = generate_scenario(abilene(), &p).unwrap();
    let b = generate_scenario(abilene(), &p).unwrap();
    assert_eq!(a, b);
    let mut q = p.clone();
    q.seed += 1;
    assert_ne!(generate_scenario(abilene(), &q).unwrap().1, a.1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generated_flows_are_well_formed(seed in any::<u64>(), k in 1u8..=5) {
        let mut p = preset(k).unwrap();
        p.seed = seed;
        let (net, flows) = generate_scenario(abilene(), &p).unwrap();
        let eligible = net.placement.as_ref().unwrap().eligible.clone();
        for f in &flows {
            prop_assert_ne!(f.source, f.destination);
            prop_assert!(p.v_min <= f.chain.len() && f.chain.len() <= p.v_max);
            let distinct: BTreeSet<_> = f.chain.iter().collect();
            prop_assert_eq!(distinct.len(), f.chain.len());
            for &x in &f.chain {
                prop_assert!((0..11).any(|i| eligible[i] && net.servers[i].supports(x)));
            }
        }
    }
}
