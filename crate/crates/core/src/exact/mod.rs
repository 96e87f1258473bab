//! Exact search for the single-flow, energy-aware single-flow and global
//! reallocation problems.
//!
//! The feasible set of each model is the product of per-flow candidates:
//! a simple s–d path plus a server for every chain element at
//! nondecreasing path positions. Capacity and delay rows are checked during
//! enumeration; the global problem adds a depth-first branch and bound over
//! flows with a combinatorial lower bound.

mod candidates;
pub mod lp;

use std::time::{Duration, Instant};

use thiserror::Error;

use crate::formulation::{objective_value, FormulationError, TOLERANCE};
use crate::model::{
    effective_support, route_difference, Allocation, FlowRoute, FlowSpec, Horizon, Matrix,
    ModelError, Network, NetworkState, ProblemMode, RoutingSolution,
};

use candidates::{enumerate, Budget, Candidate, Limits};

pub use lp::export_lp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    FeasibleTimeout,
    Infeasible,
}

/// Among optima: fewest hops (single-flow), then lexicographically smallest
/// node sequence, then smallest server indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Lexicographic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub mode: ProblemMode,
    pub alpha: f64,
    pub time_budget: Duration,
    pub node_limit: u64,
    pub tie_break: TieBreak,
    /// Rate used for flows of unknown size in the single-flow problem.
    pub stand_in_rate: Option<f64>,
    pub enforce_delay: bool,
}

impl SolverConfig {
    pub fn new(mode: ProblemMode) -> Self {
        SolverConfig {
            mode,
            alpha: 0.0,
            time_budget: Duration::from_secs(60),
            node_limit: 50_000_000,
            tie_break: TieBreak::Lexicographic,
            stand_in_rate: None,
            enforce_delay: true,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(SolverError::BadConfig(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.time_budget.is_zero() {
            return Err(SolverError::BadConfig("time budget must be positive".into()));
        }
        if let Some(r) = self.stand_in_rate {
            if !(r > 0.0 && r.is_finite()) {
                return Err(SolverError::BadConfig("stand-in rate must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("bad solver configuration: {0}")]
    BadConfig(String),
    #[error("rate of flow {flow} is unknown")]
    RatesUnknown { flow: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Formulation(#[from] FormulationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Routes aligned with the input flows and server states afterwards.
    pub allocation: Allocation,
    /// Matrix form; `None` when nothing feasible was found.
    pub solution: Option<RoutingSolution>,
    /// Objective recomputed from `solution`; infinite without one.
    pub objective: f64,
    pub status: SolveStatus,
    pub nodes_explored: u64,
    pub wall_time: Duration,
}

/// Dispatch on `config.mode`. The single-flow modes need exactly one flow.
pub fn solve(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    match config.mode {
        ProblemMode::Grr(_) => solve_grr(network, state, flows, config),
        _ if flows.len() != 1 => Err(SolverError::BadConfig(
            "single-flow problems take exactly one flow".into(),
        )),
        ProblemMode::Sfra => solve_sfra(network, state, &flows[0], config),
        ProblemMode::EnergySfra(_) => solve_energy_sfra(network, state, &flows[0], config),
    }
}

fn check_flows(network: &Network, flows: &[FlowSpec]) -> Result<(), SolverError> {
    for f in flows {
        f.validate(network.node_count(), network.vnf_count())?;
    }
    Ok(())
}

fn residual_rooms(network: &Network, state: &NetworkState, background: bool) -> (Matrix<f64>, Vec<f64>) {
    let n = network.node_count();
    let mut link = Matrix::new(n, n);
    for (i, j) in network.topology.links() {
        link[(i, j)] = state.caps.mu_l * network.topology.capacity(i, j)
            - if background { state.load[(i, j)] } else { 0.0 };
    }
    let server = (0..n)
        .map(|i| {
            state.caps.mu_s * network.servers[i].capacity
                - if background {
                    state.processing.row(i).iter().sum::<f64>()
                } else {
                    0.0
                }
        })
        .collect();
    (link, server)
}

fn single_flow(
    network: &Network,
    state: &NetworkState,
    flow: &FlowSpec,
    config: &SolverConfig,
    mode: ProblemMode,
    rate: f64,
) -> Result<SolveResult, SolverError> {
    let started = Instant::now();
    config.validate()?;
    check_flows(network, std::slice::from_ref(flow))?;
    let horizon = mode.horizon();
    let support = effective_support(network, &state.server_states, horizon);
    let (link_room, server_room) = residual_rooms(network, state, true);
    let limits = Limits {
        support: &support,
        link_room: &link_room,
        server_room: &server_room,
        rate,
        enforce_delay: config.enforce_delay,
    };
    let mut budget = Budget::new(config.node_limit, started + config.time_budget);
    // Background already above a cap makes that row infeasible whatever the
    // flow does.
    let overloaded = server_room.iter().any(|&r| r < -TOLERANCE)
        || network.topology.links().iter().any(|&(i, j)| link_room[(i, j)] < -TOLERANCE);
    let cands = if overloaded {
        Vec::new()
    } else {
        enumerate(network, flow, &limits, &mut budget)
    };

    let new_energy = |c: &Candidate| -> f64 {
        c.used
            .iter()
            .filter(|&&i| !horizon.previously_on(state.server_states[i]))
            .map(|&i| horizon.energy_prime(&network.servers[i]))
            .sum()
    };
    let best = match mode {
        ProblemMode::EnergySfra(_) => cands.iter().min_by(|a, b| {
            new_energy(a)
                .total_cmp(&new_energy(b))
                .then(a.hops().cmp(&b.hops()))
                .then(a.lex_key().cmp(&b.lex_key()))
        }),
        _ => cands
            .iter()
            .min_by(|a, b| a.hops().cmp(&b.hops()).then(a.lex_key().cmp(&b.lex_key()))),
    };
    let status = match (budget.exhausted, best.is_some()) {
        (true, _) => SolveStatus::FeasibleTimeout,
        (false, true) => SolveStatus::Optimal,
        (false, false) => SolveStatus::Infeasible,
    };
    let mut states = state.server_states.clone();
    let (route, solution, objective) = match best {
        None => (None, None, f64::INFINITY),
        Some(c) => {
            let route = FlowRoute::new(c.path.clone(), c.service.clone())?;
            let mut next = vec![false; network.node_count()];
            for &i in &c.used {
                next[i] = true;
                states[i] = crate::model::PowerState::Active;
            }
            let sol = RoutingSolution::from_routes(network, std::slice::from_ref(flow), std::slice::from_ref(&route), next)?;
            let obj = objective_value(network, state, std::slice::from_ref(flow), &sol, mode, config.alpha)?;
            (Some(route), Some(sol), obj)
        }
    };
    Ok(SolveResult {
        allocation: Allocation {
            routes: vec![route],
            server_states: states,
        },
        solution,
        objective,
        status,
        nodes_explored: budget.nodes,
        wall_time: started.elapsed(),
    })
}

/// Fewest-hop simple path that carries the chain in order within capacity
/// and delay limits. Unknown rates use `config.stand_in_rate`.
pub fn solve_sfra(
    network: &Network,
    state: &NetworkState,
    flow: &FlowSpec,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let rate = flow
        .rate
        .or(config.stand_in_rate)
        .ok_or(SolverError::RatesUnknown { flow: flow.id })?;
    single_flow(network, state, flow, config, ProblemMode::Sfra, rate)
}

/// Minimum energy of servers that must be switched on for this flow.
/// The horizon comes from `config.mode` (short-term if it has none).
pub fn solve_energy_sfra(
    network: &Network,
    state: &NetworkState,
    flow: &FlowSpec,
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let rate = flow.rate.ok_or(SolverError::RatesUnknown { flow: flow.id })?;
    let mode = ProblemMode::EnergySfra(config.mode.horizon());
    single_flow(network, state, flow, config, mode, rate)
}

const EPS: f64 = 1e-9;

struct Grr<'a> {
    cands: Vec<Vec<Candidate>>,
    reconf: Vec<Vec<usize>>,
    rates: Vec<f64>,
    min_reconf_suffix: Vec<usize>,
    energy_prime: Vec<f64>,
    total_energy: f64,
    norm: f64,
    alpha: f64,
    link_room: Matrix<f64>,
    server_room: Vec<f64>,
    use_count: Vec<u32>,
    energy_now: f64,
    reconf_now: usize,
    choice: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
    budget: &'a mut Budget,
}

impl Grr<'_> {
    fn value(&self, reconf: f64, energy: f64) -> f64 {
        let r = if self.norm > 0.0 { reconf / self.norm } else { 0.0 };
        let e = if self.total_energy > 0.0 {
            energy / self.total_energy
        } else {
            0.0
        };
        self.alpha * r + (1.0 - self.alpha) * e
    }

    fn energy_lower_bound(&self, depth: usize) -> f64 {
        if self.alpha >= 1.0 {
            return 0.0;
        }
        let mut lb: f64 = 0.0;
        for cands in &self.cands[depth..] {
            let least = cands
                .iter()
                .map(|c| {
                    c.used
                        .iter()
                        .filter(|&&i| self.use_count[i] == 0)
                        .map(|&i| self.energy_prime[i])
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            lb = lb.max(least);
        }
        lb
    }

    fn fits(&self, c: &Candidate, rate: f64) -> bool {
        c.edges().all(|(i, j)| self.link_room[(i, j)] + TOLERANCE >= rate)
            && c.loads.iter().all(|&(i, l)| self.server_room[i] + TOLERANCE >= l)
    }

    fn apply(&mut self, depth: usize, ci: usize, sign: f64) {
        let c = &self.cands[depth][ci];
        let rate = self.rates[depth];
        for w in c.path.windows(2) {
            self.link_room[(w[0], w[1])] -= sign * rate;
        }
        for &(i, l) in &c.loads {
            self.server_room[i] -= sign * l;
        }
        for &i in &c.used {
            if sign > 0.0 {
                if self.use_count[i] == 0 {
                    self.energy_now += self.energy_prime[i];
                }
                self.use_count[i] += 1;
            } else {
                self.use_count[i] -= 1;
                if self.use_count[i] == 0 {
                    self.energy_now -= self.energy_prime[i];
                }
            }
        }
        let r = self.reconf[depth][ci];
        if sign > 0.0 {
            self.reconf_now += r;
        } else {
            self.reconf_now -= r;
        }
    }

    fn dfs(&mut self, depth: usize) {
        if depth == self.cands.len() {
            let obj = self.value(self.reconf_now as f64, self.energy_now);
            if self.best.as_ref().is_none_or(|(b, _)| obj < b - EPS) {
                self.best = Some((obj, self.choice.clone()));
            }
            return;
        }
        for ci in 0..self.cands[depth].len() {
            if !self.budget.tick() {
                return;
            }
            if !self.fits(&self.cands[depth][ci], self.rates[depth]) {
                continue;
            }
            self.apply(depth, ci, 1.0);
            self.choice.push(ci);
            let reconf_lb = (self.reconf_now + self.min_reconf_suffix[depth + 1]) as f64;
            let energy_lb = self.energy_now + self.energy_lower_bound(depth + 1);
            let bound = self.value(reconf_lb, energy_lb);
            if self.best.as_ref().is_none_or(|(b, _)| bound < b - EPS) {
                self.dfs(depth + 1);
            }
            self.choice.pop();
            self.apply(depth, ci, -1.0);
            if self.budget.exhausted {
                return;
            }
        }
    }
}

/// Joint reallocation of every flow, minimizing the weighted sum of
/// normalized reconfiguration and normalized energy. Installed routes are
/// read from `state.installed`, aligned with `flows`.
pub fn solve_grr(
    network: &Network,
    state: &NetworkState,
    flows: &[FlowSpec],
    config: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    let started = Instant::now();
    config.validate()?;
    check_flows(network, flows)?;
    let horizon = match config.mode {
        ProblemMode::Grr(h) => h,
        other => other.horizon(),
    };
    let mode = ProblemMode::Grr(horizon);
    let rates: Vec<f64> = flows
        .iter()
        .map(|f| f.rate.ok_or(SolverError::RatesUnknown { flow: f.id }))
        .collect::<Result<_, _>>()?;
    let n = network.node_count();
    let support = effective_support(network, &state.server_states, horizon);
    let (link_room, server_room) = residual_rooms(network, state, false);
    let mut budget = Budget::new(config.node_limit, started + config.time_budget);

    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by(|&a, &b| rates[b].total_cmp(&rates[a]));

    let mut cands = Vec::with_capacity(flows.len());
    let mut reconf = Vec::with_capacity(flows.len());
    for &f in &order {
        let limits = Limits {
            support: &support,
            link_room: &link_room,
            server_room: &server_room,
            rate: rates[f],
            enforce_delay: config.enforce_delay,
        };
        let mut list = enumerate(network, &flows[f], &limits, &mut budget);
        list.sort_by(|a, b| a.lex_key().cmp(&b.lex_key()));
        let installed = state.installed_route(f);
        let r: Vec<usize> = list
            .iter()
            .map(|c| {
                let route = FlowRoute::new(c.path.clone(), c.service.clone()).expect("candidate is a valid route");
                route_difference(Some(&route), installed)
            })
            .collect();
        cands.push(list);
        reconf.push(r);
    }
    let mut min_reconf_suffix = vec![0usize; flows.len() + 1];
    for d in (0..flows.len()).rev() {
        min_reconf_suffix[d] = min_reconf_suffix[d + 1] + reconf[d].iter().copied().min().unwrap_or(0);
    }
    let energy_prime: Vec<f64> = network.servers.iter().map(|s| horizon.energy_prime(s)).collect();
    let total_energy = energy_prime.iter().sum();
    let enumeration_cut = budget.exhausted;
    let mut search = Grr {
        cands,
        reconf,
        rates: order.iter().map(|&f| rates[f]).collect(),
        min_reconf_suffix,
        energy_prime,
        total_energy,
        norm: if n > 1 { ((n - 1) * flows.len()) as f64 } else { 0.0 },
        alpha: config.alpha,
        link_room,
        server_room,
        use_count: vec![0; n],
        energy_now: 0.0,
        reconf_now: 0,
        choice: Vec::with_capacity(flows.len()),
        best: None,
        budget: &mut budget,
    };
    if !enumeration_cut {
        search.dfs(0);
    }
    let best = search.best.take();
    let cands = std::mem::take(&mut search.cands);
    drop(search);

    let status = match (budget.exhausted, best.is_some()) {
        (true, _) => SolveStatus::FeasibleTimeout,
        (false, true) => SolveStatus::Optimal,
        (false, false) => SolveStatus::Infeasible,
    };
    let Some((_, choice)) = best else {
        return Ok(SolveResult {
            allocation: Allocation {
                routes: vec![None; flows.len()],
                server_states: state.server_states.clone(),
            },
            solution: None,
            objective: f64::INFINITY,
            status,
            nodes_explored: budget.nodes,
            wall_time: started.elapsed(),
        });
    };
    let mut routes: Vec<Option<FlowRoute>> = vec![None; flows.len()];
    let mut used = vec![false; n];
    for (depth, &f) in order.iter().enumerate() {
        let c = &cands[depth][choice[depth]];
        for &i in &c.used {
            used[i] = true;
        }
        routes[f] = Some(FlowRoute::new(c.path.clone(), c.service.clone())?);
    }
    let plain: Vec<FlowRoute> = routes.iter().map(|r| r.clone().unwrap()).collect();
    let sol = RoutingSolution::from_routes(network, flows, &plain, used.clone())?;
    let objective = objective_value(network, state, flows, &sol, mode, config.alpha)?;
    let server_states = settle_states(&used, &state.server_states, horizon);
    Ok(SolveResult {
        allocation: Allocation {
            routes,
            server_states,
        },
        solution: Some(sol),
        objective,
        status,
        nodes_explored: budget.nodes,
        wall_time: started.elapsed(),
    })
}

/// States after a reallocation that uses exactly `used`.
pub fn settle_states(
    used: &[bool],
    before: &[crate::model::PowerState],
    horizon: Horizon,
) -> Vec<crate::model::PowerState> {
    used.iter()
        .zip(before)
        .map(|(&u, &b)| horizon.settle(u, b))
        .collect()
}
