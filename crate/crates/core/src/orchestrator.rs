//! Discrete-event controller loop.
//!
//! One pass of the loop runs per distinct event time, in this order:
//!
//! 1. Rate changes due now are applied.
//! 2. If the long-term timer is due, 3R runs on knowledge-base rates.
//!    Otherwise, if the avoidance alarm is raised, 3R runs on current rates.
//!    Either way the long-term timer is reset.
//! 3. Otherwise pending arrivals are served by NSF. Then, if congestion is
//!    detected or predicted, LT-ENSF runs; otherwise, if the GRR timer is due,
//!    ST-ENSF runs. Either resets the GRR timer.
//! 4. If the update timer is due, the knowledge base is refreshed.
//!
//! Arrivals that meet a long-term pass wait for the next pass at the same
//! time. Predictions are evaluated once per
//! knowledge-base update.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::Rng;
use thiserror::Error;

use crate::exact::{SolverConfig, SolverError};
use crate::formulation::{validate, ConstraintId, ValidationOptions};
use crate::heuristics::{apply_placements, lt_ensf, nsf, rrr, st_ensf, HeuristicError};
use crate::io::Scenario;
use crate::model::{
    compute_metrics, route_difference, Allocation, FlowRoute, FlowSpec, Horizon, Matrix,
    MetricsReport, Network, NetworkState, NodeId, PowerState, ProblemMode, UtilizationCaps,
};
use crate::trafficgen::evolve_rates;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("bad event configuration: {0}")]
    BadConfig(String),
    #[error("flow {0} has no rate; the controller needs true rates to load the network")]
    RateUnknown(usize),
    #[error("{0} arrival times for {1} flows")]
    ArrivalMismatch(usize, usize),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Timer periods and thresholds. Times are in simulated units.
#[derive(Debug, Clone, PartialEq)]
pub struct EventConfig {
    pub grr_period: f64,
    pub long_term_period: f64,
    pub update_period: f64,
    /// Link utilization above which congestion is detected.
    pub congestion_threshold: f64,
    /// Predicted utilization above which the avoidance alarm is raised.
    pub prediction_threshold: f64,
    /// First firing of each timer.
    pub long_term_offset: f64,
    pub grr_offset: f64,
    pub update_offset: f64,
    pub grr_enabled: bool,
    /// Last event time processed; defaults to the last arrival plus one
    /// long-term period.
    pub end_time: Option<f64>,
    /// Rate samples kept for the median flow size.
    pub kb_window: usize,
    /// Stand-in rate before the knowledge base holds any sample.
    pub default_mfs: f64,
}

impl Default for EventConfig {
    fn default() -> Self {
        EventConfig::with_grr_period(1.0)
    }
}

impl EventConfig {
    pub fn with_grr_period(grr: f64) -> Self {
        EventConfig {
            grr_period: grr,
            long_term_period: 10.0 * grr,
            update_period: grr,
            congestion_threshold: 0.9,
            prediction_threshold: 1.0,
            long_term_offset: 10.0 * grr,
            grr_offset: grr,
            update_offset: grr,
            grr_enabled: true,
            end_time: None,
            kb_window: 100,
            default_mfs: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        let bad = |m: String| Err(OrchestratorError::BadConfig(m));
        for (name, v) in [
            ("grr_period", self.grr_period),
            ("long_term_period", self.long_term_period),
            ("update_period", self.update_period),
            ("default_mfs", self.default_mfs),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        for (name, v) in [
            ("congestion_threshold", self.congestion_threshold),
            ("prediction_threshold", self.prediction_threshold),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(format!("{name} must lie in (0, 1]"));
            }
        }
        if self.kb_window == 0 {
            return bad("kb_window must be positive".into());
        }
        Ok(())
    }
}

/// Settings of the allocators the loop dispatches to.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    /// Per-flow exact search used by 3R.
    pub rrr: SolverConfig,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        let mut rrr = SolverConfig::new(ProblemMode::EnergySfra(Horizon::LongTerm));
        rrr.time_budget = std::time::Duration::from_secs(2);
        rrr.node_limit = 2_000_000;
        AlgoConfig { rrr }
    }
}

/// Median of `values`; the mean of the middle pair for even counts.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { (v[m - 1] + v[m]) / 2.0 })
}

/// Observed flow rates and link utilization history.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    window: usize,
    samples: VecDeque<(f64, usize, f64)>,
    latest: BTreeMap<usize, f64>,
    utilization: VecDeque<Matrix<f64>>,
}

impl KnowledgeBase {
    pub fn new(window: usize) -> Self {
        KnowledgeBase {
            window: window.max(1),
            samples: VecDeque::new(),
            latest: BTreeMap::new(),
            utilization: VecDeque::new(),
        }
    }

    pub fn record_rate(&mut self, t: f64, flow: usize, rate: f64) {
        self.samples.push_back((t, flow, rate));
        while self.samples.len() > self.window {
            self.samples.pop_front();
        }
        self.latest.insert(flow, rate);
    }

    pub fn record_utilization(&mut self, u: Matrix<f64>) {
        self.utilization.push_back(u);
        while self.utilization.len() > 2 {
            self.utilization.pop_front();
        }
    }

    /// Median flow size over the window.
    pub fn mfs(&self) -> Option<f64> {
        let rates: Vec<f64> = self.samples.iter().map(|s| s.2).collect();
        median(&rates)
    }

    pub fn estimate(&self, flow: usize) -> Option<f64> {
        self.latest.get(&flow).copied()
    }

    /// Next utilization per link by linear extrapolation of the last two
    /// samples; `None` until two samples exist.
    pub fn extrapolated_utilization(&self) -> Option<Matrix<f64>> {
        if self.utilization.len() < 2 {
            return None;
        }
        let (a, b) = (&self.utilization[0], &self.utilization[1]);
        let (r, c) = b.dims();
        let mut out = Matrix::new(r, c);
        for ((i, j), &v) in b.iter() {
            out[(i, j)] = 2.0 * v - a[(i, j)];
        }
        Some(out)
    }

    /// Append samples for the given flows and the current link utilization.
    pub fn update(&mut self, t: f64, network: &Network, state: &NetworkState, flows: &[(usize, f64)]) {
        for &(id, rate) in flows {
            self.record_rate(t, id, rate);
        }
        self.record_utilization(utilization(network, state));
    }
}

/// Link utilization L/B_max, zero off the link set.
pub fn utilization(network: &Network, state: &NetworkState) -> Matrix<f64> {
    let n = network.node_count();
    let mut u = Matrix::new(n, n);
    for (i, j) in network.topology.links() {
        u[(i, j)] = state.load[(i, j)] / network.topology.capacity(i, j);
    }
    u
}

fn over(network: &Network, u: &Matrix<f64>, threshold: f64) -> Vec<(NodeId, NodeId)> {
    network
        .topology
        .links()
        .into_iter()
        .filter(|&(i, j)| u[(i, j)] > threshold + EPS)
        .collect()
}

/// Links whose utilization exceeds `threshold`.
pub fn detect_congestion(network: &Network, state: &NetworkState, threshold: f64) -> (bool, Vec<(NodeId, NodeId)>) {
    let links = over(network, &utilization(network, state), threshold);
    (!links.is_empty(), links)
}

/// Links whose extrapolated utilization exceeds `threshold`.
pub fn predict_congestion(kb: &KnowledgeBase, network: &Network, threshold: f64) -> (bool, Vec<(NodeId, NodeId)>) {
    match kb.extrapolated_utilization() {
        None => (false, Vec::new()),
        Some(u) => {
            let links = over(network, &u, threshold);
            (!links.is_empty(), links)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trigger {
    Arrival,
    Congestion,
    Prediction,
    GrrTimer,
    LongTermTimer,
    Alarm,
}

impl Trigger {
    pub fn name(self) -> &'static str {
        match self {
            Trigger::Arrival => "arrival",
            Trigger::Congestion => "congestion",
            Trigger::Prediction => "prediction",
            Trigger::GrrTimer => "grr_timer",
            Trigger::LongTermTimer => "long_term_timer",
            Trigger::Alarm => "alarm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Nsf,
    StEnsf,
    LtEnsf,
    Rrr,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nsf => "NSF",
            Algorithm::StEnsf => "ST-ENSF",
            Algorithm::LtEnsf => "LT-ENSF",
            Algorithm::Rrr => "3R",
        }
    }
}

/// One reconfiguration.
#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub t: f64,
    pub event: Trigger,
    pub algorithm: Algorithm,
    pub metrics: MetricsReport,
    /// Arrived flows without a route after this step.
    pub rejected_flows: usize,
    /// Flows whose walk exceeds its delay budget.
    pub qos_misses: usize,
    /// Total offered rate of arrived flows.
    pub offered: f64,
    /// Installed routes after this step, aligned with the scenario flows.
    pub installed: Vec<Option<FlowRoute>>,
    pub server_states: Vec<PowerState>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsTimeline {
    pub rows: Vec<TimelineRow>,
    /// Line-oriented event log.
    pub log: Vec<String>,
    /// Final routes, server states and support after the run.
    pub final_routes: Vec<Option<FlowRoute>>,
    pub final_states: Vec<PowerState>,
}

pub const CSV_HEADER: &str = "t,event,algorithm,total_energy,reconf_overhead,max_link_util,avg_link_util,max_srv_util,avg_srv_util,rejected_flows,qos_misses";

impl MetricsTimeline {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let m = &r.metrics;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                r.event.name(),
                r.algorithm.name(),
                m.total_energy,
                m.reconfiguration_overhead,
                m.max_link_util,
                m.avg_link_util,
                m.max_server_util,
                m.avg_server_util,
                r.rejected_flows,
                r.qos_misses
            );
        }
        out
    }

    pub fn log_text(&self) -> String {
        let mut s = self.log.join("\n");
        s.push('\n');
        s
    }

    pub fn count(&self, algorithm: Algorithm) -> usize {
        self.rows.iter().filter(|r| r.algorithm == algorithm).count()
    }
}

/// A rate change applied at time `t` to flow index `flow`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateChange {
    pub t: f64,
    pub flow: usize,
    pub rate: f64,
}

struct Controller<'a> {
    network: Network,
    flows: Vec<FlowSpec>,
    arrived: Vec<bool>,
    routes: Vec<Option<FlowRoute>>,
    states: Vec<PowerState>,
    caps: UtilizationCaps,
    kb: KnowledgeBase,
    cfg: &'a EventConfig,
    algo: &'a AlgoConfig,
    timeline: MetricsTimeline,
}

impl Controller<'_> {
    fn rates(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.rate.unwrap()).collect()
    }

    fn state(&self) -> NetworkState {
        NetworkState::from_routes(
            &self.network,
            &self.flows,
            self.routes.clone(),
            &self.rates(),
            self.states.clone(),
            self.caps,
        )
        .expect("aligned vectors")
    }

    fn active(&self) -> Vec<usize> {
        (0..self.flows.len()).filter(|&f| self.arrived[f]).collect()
    }

    fn log(&mut self, t: f64, line: impl AsRef<str>) {
        self.timeline.log.push(format!("{t} {}", line.as_ref()));
    }

    /// Record the current installation as one timeline row.
    fn record(&mut self, t: f64, event: Trigger, algorithm: Algorithm, previous: &[Option<FlowRoute>]) {
        let active = self.active();
        let flows: Vec<FlowSpec> = active.iter().map(|&f| self.flows[f].clone()).collect();
        let rates: Vec<f64> = flows.iter().map(|f| f.rate.unwrap()).collect();
        let prev: Vec<Option<FlowRoute>> = active.iter().map(|&f| previous[f].clone()).collect();
        let alloc = Allocation {
            routes: active.iter().map(|&f| self.routes[f].clone()).collect(),
            server_states: self.states.clone(),
        };
        let metrics = compute_metrics(&self.network, &flows, &rates, &prev, &alloc).expect("consistent allocation");
        let rejected = alloc.rejected_count();
        let qos = self.validate(t, algorithm, &flows, &alloc);
        self.timeline.rows.push(TimelineRow {
            t,
            event,
            algorithm,
            metrics,
            rejected_flows: rejected,
            qos_misses: qos,
            offered: rates.iter().sum(),
            installed: self.routes.clone(),
            server_states: self.states.clone(),
        });
    }

    /// Walk-mode validation of the installed routes. Delay misses are
    /// counted; other violations go to the log.
    fn validate(&mut self, t: f64, algorithm: Algorithm, flows: &[FlowSpec], alloc: &Allocation) -> usize {
        let (kept, sol) = match alloc.to_solution(&self.network, flows) {
            Ok(v) => v,
            Err(e) => {
                self.log(t, format!("validation skipped: {e}"));
                return 0;
            }
        };
        let state = NetworkState {
            server_states: self.states.clone(),
            caps: self.caps,
            ..NetworkState::empty(&self.network)
        };
        let opts = ValidationOptions::new(ProblemMode::Grr(Horizon::LongTerm)).walk_mode(true);
        let rep = match validate(&self.network, &state, &kept, &sol, &opts) {
            Ok(r) => r,
            Err(e) => {
                self.log(t, format!("validation skipped: {e}"));
                return 0;
            }
        };
        let mut missed: Vec<usize> = rep.violations_of(ConstraintId::Eq12).filter_map(|v| v.flow).collect();
        missed.sort_unstable();
        missed.dedup();
        let energy_rows = matches!(algorithm, Algorithm::Rrr | Algorithm::LtEnsf);
        let other: Vec<String> = rep
            .violations()
            .iter()
            .filter(|v| v.constraint != ConstraintId::Eq12)
            .filter(|v| energy_rows || !matches!(v.constraint, ConstraintId::Eq21 | ConstraintId::Eq25))
            .map(|v| format!("{}:{:?}", v.constraint, v.flow))
            .collect();
        if !other.is_empty() {
            self.log(t, format!("violations {}", other.join(" ")));
        }
        missed.len()
    }

    /// Replace the routes of arrived flows with `alloc` (aligned with them).
    fn install(&mut self, active: &[usize], alloc: Allocation) {
        for (k, &f) in active.iter().enumerate() {
            self.routes[f] = alloc.routes[k].clone();
        }
        self.states = alloc.server_states;
    }

    fn serve_arrival(&mut self, t: f64, f: usize) {
        self.arrived[f] = true;
        let previous = self.routes.clone();
        let mfs = self.kb.mfs().unwrap_or(self.cfg.default_mfs);
        let state = self.state();
        match nsf(&self.network, &state, &self.flows[f], mfs) {
            Ok(walk) => {
                let route = walk.to_route().expect("segments chain");
                for (node, _) in route.assignment(&self.flows[f].chain) {
                    self.states[node] = PowerState::Active;
                }
                self.log(t, format!("NSF flow {} walk {:?}", self.flows[f].id, route.walk()));
                self.routes[f] = Some(route);
            }
            Err(e) => self.log(t, format!("NSF rejected: {e}")),
        }
        self.record(t, Trigger::Arrival, Algorithm::Nsf, &previous);
    }

    fn global(&mut self, t: f64, event: Trigger, algorithm: Algorithm, use_kb: bool) -> Result<(), OrchestratorError> {
        let active = self.active();
        let flows: Vec<FlowSpec> = active
            .iter()
            .map(|&f| {
                let mut flow = self.flows[f].clone();
                if use_kb {
                    if let Some(r) = self.kb.estimate(flow.id) {
                        flow.rate = Some(r);
                    }
                }
                flow
            })
            .collect();
        let state = NetworkState {
            server_states: self.states.clone(),
            caps: self.caps,
            ..NetworkState::empty(&self.network)
        };
        let out = match algorithm {
            Algorithm::StEnsf => st_ensf(&self.network, &state, &flows)?,
            Algorithm::LtEnsf => lt_ensf(&self.network, &state, &flows)?,
            Algorithm::Rrr => rrr(&self.network, &state, &flows, &self.algo.rrr)?,
            Algorithm::Nsf => unreachable!("NSF serves arrivals only"),
        };
        for e in &out.failures {
            self.log(t, format!("{} rejected: {e}", algorithm.name()));
        }
        apply_placements(&mut self.network, &out.placements);
        let previous = self.routes.clone();
        self.install(&active, out.allocation);
        self.log(t, format!("{} after {}", algorithm.name(), event.name()));
        self.record(t, event, algorithm, &previous);
        Ok(())
    }
}

/// Run the loop over `scenario` on `network`.
pub fn run(
    network: &Network,
    scenario: &Scenario,
    cfg: &EventConfig,
    algo: &AlgoConfig,
) -> Result<MetricsTimeline, OrchestratorError> {
    run_with_changes(network, scenario, &[], cfg, algo)
}

/// As [`run`], with rate changes applied at their times.
pub fn run_with_changes(
    network: &Network,
    scenario: &Scenario,
    changes: &[RateChange],
    cfg: &EventConfig,
    algo: &AlgoConfig,
) -> Result<MetricsTimeline, OrchestratorError> {
    cfg.validate()?;
    algo.rrr.validate()?;
    let flows = scenario.flows.clone();
    if scenario.arrivals.len() != flows.len() {
        return Err(OrchestratorError::ArrivalMismatch(scenario.arrivals.len(), flows.len()));
    }
    for f in &flows {
        if f.rate.is_none() {
            return Err(OrchestratorError::RateUnknown(f.id));
        }
    }
    let mut arrivals: Vec<(f64, usize)> = scenario.arrivals.iter().copied().zip(0..).collect();
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut changes: Vec<RateChange> = changes.to_vec();
    changes.sort_by(|a, b| a.t.total_cmp(&b.t));
    let last_arrival = arrivals.last().map(|a| a.0).unwrap_or(0.0);
    let end = cfg.end_time.unwrap_or(last_arrival + cfg.long_term_period);

    let n_flows = flows.len();
    let mut c = Controller {
        network: network.clone(),
        flows,
        arrived: vec![false; n_flows],
        routes: vec![None; n_flows],
        states: network.initial_states(),
        caps: scenario.caps,
        kb: KnowledgeBase::new(cfg.kb_window),
        cfg,
        algo,
        timeline: MetricsTimeline::default(),
    };

    let mut next_arrival = 0usize;
    let mut next_change = 0usize;
    let mut next_lt = cfg.long_term_offset;
    let mut next_grr = if cfg.grr_enabled { cfg.grr_offset } else { f64::INFINITY };
    let mut next_update = cfg.update_offset;
    let mut fresh_prediction = false;

    loop {
        let t = [
            arrivals.get(next_arrival).map(|a| a.0).unwrap_or(f64::INFINITY),
            changes.get(next_change).map(|c| c.t).unwrap_or(f64::INFINITY),
            next_lt,
            next_grr,
            next_update,
        ]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
        if !(t <= end + EPS) {
            break;
        }

        while next_change < changes.len() && changes[next_change].t <= t + EPS {
            let ch = changes[next_change];
            c.flows[ch.flow].rate = Some(ch.rate);
            next_change += 1;
        }

        let alarm = fresh_prediction && predict_congestion(&c.kb, &c.network, cfg.prediction_threshold).0;
        if next_lt <= t + EPS {
            fresh_prediction = false;
            c.global(t, Trigger::LongTermTimer, Algorithm::Rrr, true)?;
            next_lt = t + cfg.long_term_period;
        } else if alarm && !c.active().is_empty() {
            fresh_prediction = false;
            c.global(t, Trigger::Alarm, Algorithm::Rrr, false)?;
            next_lt = t + cfg.long_term_period;
        } else {
            while next_arrival < arrivals.len() && arrivals[next_arrival].0 <= t + EPS {
                let f = arrivals[next_arrival].1;
                next_arrival += 1;
                c.serve_arrival(t, f);
            }
            let detected = detect_congestion(&c.network, &c.state(), cfg.congestion_threshold).0;
            let predicted = fresh_prediction && predict_congestion(&c.kb, &c.network, cfg.congestion_threshold).0;
            fresh_prediction = false;
            if (detected || predicted) && !c.active().is_empty() {
                let trigger = if detected { Trigger::Congestion } else { Trigger::Prediction };
                c.global(t, trigger, Algorithm::LtEnsf, false)?;
                if cfg.grr_enabled {
                    next_grr = t + cfg.grr_period;
                }
            } else if next_grr <= t + EPS {
                c.global(t, Trigger::GrrTimer, Algorithm::StEnsf, false)?;
                next_grr = t + cfg.grr_period;
            }
        }

        if next_update <= t + EPS {
            let samples: Vec<(usize, f64)> = c
                .active()
                .iter()
                .filter(|&&f| c.routes[f].is_some())
                .map(|&f| (c.flows[f].id, c.flows[f].rate.unwrap()))
                .collect();
            let state = c.state();
            c.kb.update(t, &c.network, &state, &samples);
            fresh_prediction = true;
            next_update = t + cfg.update_period;
        }
    }

    c.timeline.final_routes = c.routes.clone();
    c.timeline.final_states = c.states.clone();
    Ok(c.timeline)
}

/// Per-iteration summary of a replay.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationReport {
    pub iteration: usize,
    /// Time of the long-term reallocation in this iteration.
    pub t: f64,
    pub offered: f64,
    pub total_energy: f64,
    pub all_on_energy: f64,
    pub reconfiguration_overhead: usize,
    pub rejected_flows: usize,
}

/// Iteration `k` (1-based) spans [(k−1)P, kP) with P the long-term period.
pub fn iteration_of(t: f64, period: f64) -> usize {
    (t / period + EPS).floor() as usize + 1
}

/// Multi-iteration run: every flow arrives at time 0, rates grow at the
/// start of each later iteration, and 3R fires mid-iteration after a
/// knowledge-base refresh. The GRR timer is off.
pub fn replay(
    network: &Network,
    scenario: &Scenario,
    iterations: usize,
    rng: &mut impl Rng,
    cfg: &EventConfig,
    algo: &AlgoConfig,
) -> Result<(MetricsTimeline, Vec<IterationReport>), OrchestratorError> {
    let p = cfg.long_term_period;
    let cfg = EventConfig {
        long_term_offset: p / 2.0,
        update_period: p,
        update_offset: p / 4.0,
        grr_enabled: false,
        end_time: Some(iterations as f64 * p - p / 8.0),
        ..cfg.clone()
    };
    let mut sc = scenario.clone();
    sc.arrivals = vec![0.0; sc.flows.len()];
    let mut changes = Vec::new();
    let mut current = sc.flows.clone();
    for k in 1..iterations {
        current = evolve_rates(&current, rng);
        for (f, flow) in current.iter().enumerate() {
            changes.push(RateChange {
                t: k as f64 * p,
                flow: f,
                rate: flow.rate.ok_or(OrchestratorError::RateUnknown(flow.id))?,
            });
        }
    }
    let timeline = run_with_changes(network, &sc, &changes, &cfg, algo)?;
    let all_on = network.all_on_energy();
    let report = timeline
        .rows
        .iter()
        .filter(|r| r.algorithm == Algorithm::Rrr && r.event == Trigger::LongTermTimer)
        .map(|r| IterationReport {
            iteration: iteration_of(r.t, p),
            t: r.t,
            offered: r.offered,
            total_energy: r.metrics.total_energy,
            all_on_energy: all_on,
            reconfiguration_overhead: r.metrics.reconfiguration_overhead,
            rejected_flows: r.rejected_flows,
        })
        .collect();
    Ok((timeline, report))
}

/// Σ over consecutive rows of the route differences of their snapshots.
pub fn telescoped_overhead(timeline: &MetricsTimeline) -> usize {
    let mut prev: Vec<Option<FlowRoute>> = match timeline.rows.first() {
        Some(r) => vec![None; r.installed.len()],
        None => return 0,
    };
    let mut total = 0;
    for r in &timeline.rows {
        total += r
            .installed
            .iter()
            .zip(&prev)
            .map(|(a, b)| route_difference(a.as_ref(), b.as_ref()))
            .sum::<usize>();
        prev = r.installed.clone();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_conventions() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[0.3]), Some(0.3));
        assert_eq!(median(&[0.5, 0.1, 0.3]), Some(0.3));
        assert!((median(&[0.1, 0.3]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn window_drops_old_samples() {
        let mut kb = KnowledgeBase::new(2);
        kb.record_rate(0.0, 1, 10.0);
        kb.record_rate(1.0, 2, 0.1);
        kb.record_rate(2.0, 3, 0.3);
        assert!((kb.mfs().unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(kb.estimate(1), Some(10.0));
    }
}
