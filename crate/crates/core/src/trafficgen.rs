//! Seeded scenario generation: VNF hosting, flow sets and rate growth.
//!
//! Every entry point takes an explicit RNG or seed. Seeds feed
//! `ChaCha8Rng::seed_from_u64`, whose output is fixed across platforms and
//! releases of `rand_chacha`.

use rand::seq::index::sample;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{arity, err, index, lines, num, ParseError};
use crate::model::{
    FlowSpec, ModelError, Network, PlacementLimits, PowerState, ServerSpec, Topology, VnfCatalog,
};

pub type GenRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> GenRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn default_processing() -> f64 {
    0.1
}
fn default_theta() -> f64 {
    0.1
}
fn default_idle() -> f64 {
    0.6
}
fn default_e_min() -> f64 {
    200.0
}
fn default_e_max() -> f64 {
    400.0
}

/// Generator inputs. The first block mirrors the scenario table; the rest
/// describes the servers built around a topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenParams {
    /// Mean flow rate as a fraction of link capacity.
    pub b_f: f64,
    /// Fraction of nodes whose server may host VNFs.
    pub gamma: f64,
    /// Mean chain length before clipping.
    pub v_avg: f64,
    /// Fraction of VNF types hosted per eligible server.
    pub x_gamma: f64,
    pub v_min: usize,
    pub v_max: usize,
    pub tau: f64,
    pub tau_s: f64,
    pub tau_d: f64,
    pub beta: f64,
    /// Per-source flow cap.
    pub f_max: usize,
    pub vnf_types: usize,
    pub seed: u64,
    /// Flow count reported alongside the preset; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_flows: Option<usize>,
    #[serde(default = "default_processing")]
    pub processing: f64,
    /// Server capacity as a fraction of incoming link capacity.
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_idle")]
    pub idle_fraction: f64,
    #[serde(default = "default_e_min")]
    pub e_min: f64,
    #[serde(default = "default_e_max")]
    pub e_max: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
    #[error("{eligible} servers with {per_server} types each cannot cover {types} VNF types")]
    Uncoverable {
        eligible: usize,
        per_server: usize,
        types: usize,
    },
    #[error("unknown preset {0}; presets are 1 to 5")]
    UnknownPreset(u8),
    #[error("preset: {0}")]
    Preset(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const PRESETS: [&str; 5] = [
    include_str!("../data/presets/scenario1.toml"),
    include_str!("../data/presets/scenario2.toml"),
    include_str!("../data/presets/scenario3.toml"),
    include_str!("../data/presets/scenario4.toml"),
    include_str!("../data/presets/scenario5.toml"),
];

/// The Abilene backbone shipped with the crate.
pub const ABILENE: &str = include_str!("../data/abilene.txt");

/// Scenario presets 1 to 5.
pub fn preset(k: u8) -> Result<GenParams, GenError> {
    let text = PRESETS
        .get((k as usize).wrapping_sub(1))
        .ok_or(GenError::UnknownPreset(k))?;
    let p: GenParams = toml::from_str(text).map_err(|e| GenError::Preset(e.to_string()))?;
    p.validate()?;
    Ok(p)
}

// Products such as 0.7 × 10 land a hair off the integer.
fn ceil(x: f64) -> usize {
    (x - 1e-9).ceil().max(0.0) as usize
}

fn floor(x: f64) -> usize {
    (x + 1e-9).floor().max(0.0) as usize
}

impl GenParams {
    pub fn from_toml(text: &str) -> Result<Self, GenError> {
        let p: GenParams = toml::from_str(text).map_err(|e| GenError::Preset(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("parameters serialize")
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::BadParams(m.into()));
        for (name, v) in [
            ("b_f", self.b_f),
            ("gamma", self.gamma),
            ("x_gamma", self.x_gamma),
            ("tau", self.tau),
            ("tau_s", self.tau_s),
            ("tau_d", self.tau_d),
            ("beta", self.beta),
            ("theta", self.theta),
            ("idle_fraction", self.idle_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GenError::BadParams(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !(self.v_min as f64 <= self.v_avg + 1e-9
            && self.v_avg <= self.v_max as f64 + 1e-9
            && self.v_max <= self.vnf_types)
        {
            return bad("need v_min <= v_avg <= v_max <= vnf_types");
        }
        if self.f_max < 1 {
            return bad("f_max must be at least 1");
        }
        if !(self.processing > 0.0 && self.processing.is_finite()) {
            return bad("processing must be positive");
        }
        if !(self.e_min >= 0.0 && self.e_min <= self.e_max) {
            return bad("need 0 <= e_min <= e_max");
        }
        Ok(())
    }

    /// Number of eligible servers, ⌈γ·N⌉.
    pub fn eligible_count(&self, n: usize) -> usize {
        ceil(self.gamma * n as f64).min(n)
    }

    /// Types hosted per eligible server, ⌊X_γ·X⌋.
    pub fn types_per_server(&self) -> usize {
        floor(self.x_gamma * self.vnf_types as f64).min(self.vnf_types)
    }
}

/// Hosting matrix (node × type) and the eligible servers.
#[derive(Debug, Clone, PartialEq)]
pub struct Hosting {
    pub supported: Vec<Vec<bool>>,
    pub eligible: Vec<bool>,
}

const COVER_ATTEMPTS: usize = 100_000;

/// Pick ⌈γ·N⌉ eligible servers and give each a uniform set of ⌊X_γ·X⌋
/// types, redrawing until every type is hosted somewhere.
pub fn generate_hosting(n: usize, params: &GenParams, rng: &mut impl Rng) -> Result<Hosting, GenError> {
    params.validate()?;
    let x = params.vnf_types;
    let eligible_count = params.eligible_count(n);
    let per_server = params.types_per_server();
    let uncoverable = GenError::Uncoverable {
        eligible: eligible_count,
        per_server,
        types: x,
    };
    if eligible_count == 0 || eligible_count * per_server < x {
        return Err(uncoverable);
    }
    let mut eligible = vec![false; n];
    for i in sample(rng, n, eligible_count) {
        eligible[i] = true;
    }
    for _ in 0..COVER_ATTEMPTS {
        let mut supported = vec![vec![false; x]; n];
        for (i, row) in supported.iter_mut().enumerate() {
            if eligible[i] {
                for t in sample(rng, x, per_server) {
                    row[t] = true;
                }
            }
        }
        let covered = (0..x).all(|t| supported.iter().any(|row| row[t]));
        if covered {
            return Ok(Hosting { supported, eligible });
        }
    }
    Err(uncoverable)
}

/// Count in 1..=cap from a geometric law on {1, 2, ...} with success
/// probability `p`, clipped at `cap`.
fn clipped_geometric(p: f64, cap: usize, rng: &mut impl Rng) -> usize {
    let p = p.clamp(f64::MIN_POSITIVE, 1.0);
    let g = Geometric::new(p).expect("probability in (0, 1]").sample(rng);
    (g.saturating_add(1)).min(cap as u64) as usize
}

/// Success probability of the per-source flow count.
pub fn flow_count_p(params: &GenParams, destinations: usize) -> f64 {
    (1.0 / (params.beta * destinations as f64)).min(1.0)
}

fn mean_link_capacity(topology: &Topology) -> f64 {
    let links = topology.links();
    if links.is_empty() {
        return 0.0;
    }
    links.iter().map(|&(i, j)| topology.capacity(i, j)).sum::<f64>() / links.len() as f64
}

/// Edge, source and destination switch sets.
pub fn endpoint_sets(n: usize, params: &GenParams, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let edge_n = ceil(params.tau * n as f64).min(n);
    let mut edge: Vec<usize> = sample(rng, n, edge_n).into_vec();
    edge.sort_unstable();
    let ns = ceil(params.tau * params.tau_s * n as f64).min(edge.len());
    let nd = ceil(params.tau * params.tau_d * n as f64).min(edge.len());
    let mut sources: Vec<usize> = sample(rng, edge.len(), ns).into_iter().map(|k| edge[k]).collect();
    let mut dests: Vec<usize> = sample(rng, edge.len(), nd).into_iter().map(|k| edge[k]).collect();
    sources.sort_unstable();
    dests.sort_unstable();
    (sources, dests)
}

fn one_flow(
    id: usize,
    source: usize,
    dests: &[usize],
    params: &GenParams,
    max_rate: f64,
    rng: &mut impl Rng,
) -> Option<FlowSpec> {
    let choices: Vec<usize> = dests.iter().copied().filter(|&d| d != source).collect();
    let &d = choices.as_slice().choose(rng)?;
    let mut rate = 0.0;
    while rate <= 0.0 {
        rate = rng.random_range(0.0..max_rate);
    }
    let len = if params.v_avg > 0.0 {
        clipped_geometric(1.0 / params.v_avg, usize::MAX, rng)
    } else {
        0
    };
    let len = len.clamp(params.v_min, params.v_max);
    let mut chain: Vec<usize> = sample(rng, params.vnf_types, len).into_vec();
    chain.shuffle(rng);
    Some(FlowSpec::new(id, source, d, rate, chain))
}

/// Flows per source drawn from the clipped geometric law; destinations
/// uniform among the other destination switches; rates uniform on
/// (0, 2·B_f·capacity); chains of distinct types in random order.
/// Sources with no other destination generate nothing.
pub fn generate_flows(topology: &Topology, params: &GenParams, rng: &mut impl Rng) -> Result<Vec<FlowSpec>, GenError> {
    params.validate()?;
    let n = topology.node_count();
    let (sources, dests) = endpoint_sets(n, params, rng);
    let max_rate = 2.0 * params.b_f * mean_link_capacity(topology);
    if max_rate <= 0.0 {
        return Err(GenError::BadParams("flow rates would be zero".into()));
    }
    let p = flow_count_p(params, dests.len());
    let mut flows = Vec::new();
    for &s in &sources {
        let count = clipped_geometric(p, params.f_max, rng);
        for _ in 0..count {
            if let Some(f) = one_flow(flows.len() + 1, s, &dests, params, max_rate, rng) {
                flows.push(f);
            }
        }
    }
    Ok(flows)
}

/// Exactly `count` flows: sources drawn uniformly, everything else as in
/// [`generate_flows`]. Used for scaling runs.
pub fn generate_n_flows(
    topology: &Topology,
    params: &GenParams,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<FlowSpec>, GenError> {
    params.validate()?;
    let (sources, dests) = endpoint_sets(topology.node_count(), params, rng);
    let max_rate = 2.0 * params.b_f * mean_link_capacity(topology);
    if sources.is_empty() || dests.len() < 2 || max_rate <= 0.0 {
        return Err(GenError::BadParams("no usable source/destination pair".into()));
    }
    let mut flows = Vec::with_capacity(count);
    while flows.len() < count {
        let &s = sources.as_slice().choose(rng).unwrap();
        if let Some(f) = one_flow(flows.len() + 1, s, &dests, params, max_rate, rng) {
            flows.push(f);
        }
    }
    Ok(flows)
}

/// Multiply every rate by 1 + u, u uniform on (0, 0.2].
pub fn evolve_rates(flows: &[FlowSpec], rng: &mut impl Rng) -> Vec<FlowSpec> {
    flows
        .iter()
        .map(|f| {
            let u = 0.2 - rng.random_range(0.0..0.2);
            FlowSpec {
                rate: f.rate.map(|r| r * (1.0 + u)),
                ..f.clone()
            }
        })
        .collect()
}

/// Parse a link list: `node i name` lines (optional) and
/// `edge i j capacity delay` lines, which add both directions.
pub fn parse_links(text: &str) -> Result<Topology, ParseError> {
    let mut edges = Vec::new();
    let mut n = 0;
    for (ln, t) in lines(text) {
        match t[0] {
            "node" => {
                arity(ln, &t, 2, 3)?;
                let v: usize = t[1].parse().map_err(|_| err(ln, "bad node index"))?;
                n = n.max(v);
            }
            "edge" => {
                arity(ln, &t, 5, 5)?;
                let i: usize = t[1].parse().map_err(|_| err(ln, "bad node index"))?;
                let j: usize = t[2].parse().map_err(|_| err(ln, "bad node index"))?;
                n = n.max(i).max(j);
                edges.push((ln, t[1].to_string(), t[2].to_string(), num(ln, t[3])?, num(ln, t[4])?));
            }
            other => return Err(err(ln, format!("unknown keyword `{other}`"))),
        }
    }
    let mut topo = Topology::new(n);
    for (ln, a, b, cap, delay) in edges {
        let i = index(ln, &a, n, "node")?;
        let j = index(ln, &b, n, "node")?;
        topo.add_bidirectional(i, j, cap, delay)
            .map_err(|e| err(ln, e.to_string()))?;
    }
    Ok(topo)
}

pub fn abilene() -> Topology {
    parse_links(ABILENE).expect("bundled topology parses")
}

/// Servers around `topology`: capacity Θ·(incoming link capacity), energy
/// linear in capacity between `e_min` and `e_max` (all `e_max` when every
/// capacity is equal). Nodes outside the eligible set get no server.
pub fn build_network(
    topology: Topology,
    hosting: &Hosting,
    params: &GenParams,
    initial: PowerState,
) -> Result<Network, GenError> {
    let n = topology.node_count();
    let caps: Vec<f64> = (0..n)
        .map(|i| params.theta * topology.incoming_capacity(i))
        .collect();
    let present: Vec<f64> = (0..n).filter(|&i| hosting.eligible[i]).map(|i| caps[i]).collect();
    let lo = present.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let servers = (0..n)
        .map(|i| {
            if !hosting.eligible[i] {
                return ServerSpec::absent(params.vnf_types);
            }
            let energy = if hi > lo {
                params.e_min + (caps[i] - lo) / (hi - lo) * (params.e_max - params.e_min)
            } else {
                params.e_max
            };
            ServerSpec {
                capacity: caps[i],
                energy,
                supported: hosting.supported[i].clone(),
                state: initial,
                idle_fraction: params.idle_fraction,
            }
        })
        .collect();
    let vnfs = VnfCatalog::uniform(params.vnf_types, params.processing)?;
    let network = Network::new(topology, servers, vnfs)?.with_placement(PlacementLimits {
        eligible: hosting.eligible.clone(),
        max_types: params.types_per_server(),
    })?;
    Ok(network)
}

/// Network and first-iteration flows for `params` on `topology`, all from
/// `params.seed`.
pub fn generate_scenario(topology: Topology, params: &GenParams) -> Result<(Network, Vec<FlowSpec>), GenError> {
    let mut rng = rng_from_seed(params.seed);
    let hosting = generate_hosting(topology.node_count(), params, &mut rng)?;
    let flows = generate_flows(&topology, params, &mut rng)?;
    let network = build_network(topology, &hosting, params, PowerState::Active)?;
    Ok((network, flows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load() {
        for k in 1..=5 {
            let p = preset(k).unwrap();
            assert_eq!(p.vnf_types, 10);
            assert_eq!(p.f_max, 10);
        }
        assert!(preset(0).is_err());
        assert!(preset(6).is_err());
        let p5 = preset(5).unwrap();
        assert_eq!((p5.b_f, p5.gamma, p5.v_avg), (0.2, 0.5, 2.5));
        assert_eq!(GenParams::from_toml(&p5.to_toml()).unwrap(), p5);
    }

    #[test]
    fn abilene_shape() {
        let t = abilene();
        assert_eq!(t.node_count(), 11);
        assert_eq!(t.link_count(), 28);
        t.check_symmetric().unwrap();
    }
}
