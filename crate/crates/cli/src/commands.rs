use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sfc_core::exact::{export_lp as lp_text, solve_grr, solve_sfra, SolveStatus, SolverConfig};
use sfc_core::formulation::{objective_value, validate as check, ConstraintId, ConstraintReport, ValidationOptions};
use sfc_core::heuristics::{apply_placements, lt_ensf, nsf, rrr, st_ensf};
use sfc_core::io::{
    parse_scenario, parse_solution, parse_topology, write_flow_solution, write_scenario,
    write_server_states, write_topology, Scenario, SolutionFile,
};
use sfc_core::model::{
    compute_metrics, resolve_rates, Allocation, FlowRoute, FlowSpec, Network, NetworkState,
    PowerState, ProblemMode,
};
use sfc_core::orchestrator::{self, median, AlgoConfig, EventConfig};
use sfc_core::trafficgen::{
    abilene, evolve_rates, generate_scenario, parse_links, preset, rng_from_seed, GenError, GenParams,
};

use crate::config::{Algo, Mode, RunConfig};
use crate::error::{read, write, CliError};

const DEFAULT_STAND_IN: f64 = 0.1;

fn gen_error(e: GenError) -> CliError {
    match e {
        GenError::UnknownPreset(_) | GenError::BadParams(_) => CliError::Usage(e.to_string()),
        other => CliError::failed(other),
    }
}

fn parse<T>(path: &Path, f: impl FnOnce(&str) -> Result<T, sfc_core::io::ParseError>) -> Result<T, CliError> {
    let text = read(path)?;
    f(&text).map_err(|source| CliError::Parse {
        path: path.to_path_buf(),
        source,
    })
}

fn set_idle_fraction(network: &mut Network, delta: Option<f64>) {
    if let Some(d) = delta {
        for s in &mut network.servers {
            s.idle_fraction = d;
        }
    }
}

pub struct GenerateOptions {
    pub preset: Option<u8>,
    pub params: Option<PathBuf>,
    pub topology: Option<PathBuf>,
    pub seed: Option<u64>,
    pub theta: Option<f64>,
    pub delta: Option<f64>,
    pub out: PathBuf,
}

fn gen_params(preset_id: Option<u8>, params: Option<&Path>) -> Result<GenParams, CliError> {
    match (preset_id, params) {
        (Some(_), Some(_)) => Err(CliError::Usage("give either --preset or --params, not both".into())),
        (Some(k), None) => preset(k).map_err(gen_error),
        (None, Some(p)) => GenParams::from_toml(&read(p)?).map_err(|e| CliError::Usage(format!("{}: {e}", p.display()))),
        (None, None) => Err(CliError::Usage("need --preset or --params".into())),
    }
}

fn generated(
    params: &GenParams,
    topology: Option<&Path>,
) -> Result<(Network, Vec<FlowSpec>), CliError> {
    let topo = match topology {
        Some(p) => parse(p, parse_links)?,
        None => abilene(),
    };
    generate_scenario(topo, params).map_err(gen_error)
}

pub fn generate(o: &GenerateOptions) -> Result<(), CliError> {
    let mut params = gen_params(o.preset, o.params.as_deref())?;
    if let Some(s) = o.seed {
        params.seed = s;
    }
    if let Some(t) = o.theta {
        params.theta = t;
    }
    if let Some(d) = o.delta {
        params.idle_fraction = d;
    }
    params.validate().map_err(gen_error)?;
    let (network, flows) = generated(&params, o.topology.as_deref())?;
    let scenario = Scenario::new(flows);
    write(&o.out.join("topology.txt"), &write_topology(&network))?;
    write(&o.out.join("scenario.txt"), &write_scenario(&scenario))?;

    let f = scenario.flows.len();
    let mean = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let rate = mean(scenario.flows.iter().filter_map(|f| f.rate).collect());
    let chain = mean(scenario.flows.iter().map(|f| f.chain.len() as f64).collect());
    let eligible = network.placement.as_ref().map(|p| p.eligible.iter().filter(|&&e| e).count()).unwrap_or(0);
    println!("flows {f}");
    println!("mean_rate {rate:.6}");
    println!("mean_chain_length {chain:.6}");
    println!(
        "hosting gamma={} eligible={}/{} types_per_server={}",
        params.gamma,
        eligible,
        network.node_count(),
        params.types_per_server()
    );
    println!("seed {}", params.seed);
    Ok(())
}

/// Network and scenario from files or a preset, with overrides applied.
fn load(cfg: &RunConfig) -> Result<(Network, Scenario, u64), CliError> {
    let (mut network, mut scenario, seed) = match cfg.preset {
        Some(k) => {
            let mut params = preset(k).map_err(gen_error)?;
            if let Some(s) = cfg.seed {
                params.seed = s;
            }
            if let Some(t) = cfg.theta {
                params.theta = t;
            }
            params.validate().map_err(gen_error)?;
            let (net, flows) = generated(&params, cfg.topology.as_deref())?;
            (net, Scenario::new(flows), params.seed)
        }
        None => {
            let topo = cfg.topology.as_ref().expect("checked");
            let network = parse(topo, parse_topology)?;
            let scenario = parse(cfg.scenario.as_ref().expect("checked"), |t| parse_scenario(t, &network))?;
            (network, scenario, cfg.seed.unwrap_or(0))
        }
    };
    set_idle_fraction(&mut network, cfg.delta);
    if let Some(v) = cfg.mu_l {
        scenario.caps.mu_l = v;
    }
    if let Some(v) = cfg.mu_s {
        scenario.caps.mu_s = v;
    }
    Ok((network, scenario, seed))
}

fn time_budget(cfg: &RunConfig) -> Duration {
    Duration::from_secs_f64(cfg.time_budget.unwrap_or(60.0))
}

struct ExactSummary {
    objective: f64,
    recomputed: f64,
    status: SolveStatus,
}

struct Step {
    allocation: Allocation,
    exact: Option<ExactSummary>,
}

fn mark_active(states: &mut [PowerState], flow: &FlowSpec, route: &FlowRoute) {
    for (node, _) in route.assignment(&flow.chain) {
        states[node] = PowerState::Active;
    }
}

/// One allocation of every flow, starting from empty loads.
fn allocate(
    algo: Algo,
    network: &mut Network,
    scenario: &Scenario,
    flows: &[FlowSpec],
    previous: &Allocation,
    cfg: &RunConfig,
) -> Result<Step, CliError> {
    let mode = cfg.mode.unwrap_or(Mode::LongTerm);
    let stand_in = cfg.stand_in_rate.unwrap_or(DEFAULT_STAND_IN);
    let base = NetworkState {
        server_states: previous.server_states.clone(),
        caps: scenario.caps,
        ..NetworkState::empty(network)
    };
    let mut solver = SolverConfig::new(ProblemMode::EnergySfra(mode.horizon()));
    solver.time_budget = time_budget(cfg);
    solver.alpha = cfg.alpha.unwrap_or(0.0);

    let heuristic = |out: sfc_core::heuristics::HeuristicOutcome, network: &mut Network| {
        apply_placements(network, &out.placements);
        Step {
            allocation: out.allocation,
            exact: None,
        }
    };
    Ok(match algo {
        Algo::StEnsf => heuristic(st_ensf(network, &base, flows).map_err(CliError::failed)?, network),
        Algo::LtEnsf => heuristic(lt_ensf(network, &base, flows).map_err(CliError::failed)?, network),
        Algo::Rrr | Algo::ExactEnergySfra => {
            heuristic(rrr(network, &base, flows, &solver).map_err(CliError::failed)?, network)
        }
        Algo::Nsf | Algo::ExactSfra => {
            let mut order: Vec<usize> = (0..flows.len()).collect();
            order.sort_by(|&a, &b| scenario.arrivals[a].total_cmp(&scenario.arrivals[b]).then(a.cmp(&b)));
            let mut state = base;
            let mut routes = vec![None; flows.len()];
            let mut seen = Vec::new();
            solver.mode = ProblemMode::Sfra;
            solver.stand_in_rate = Some(stand_in);
            for f in order {
                let flow = &flows[f];
                let route = if algo == Algo::Nsf {
                    let mfs = median(&seen).unwrap_or(stand_in);
                    nsf(network, &state, flow, mfs).ok().map(|w| w.to_route().expect("segments chain"))
                } else {
                    let res = solve_sfra(network, &state, flow, &solver).map_err(CliError::failed)?;
                    res.allocation.routes[0].clone()
                };
                if let Some(r) = route {
                    let rate = flow.rate.unwrap_or(stand_in);
                    state.add_route(network, flow, &r, rate);
                    mark_active(&mut state.server_states, flow, &r);
                    seen.extend(flow.rate);
                    routes[f] = Some(r);
                }
            }
            Step {
                allocation: Allocation {
                    routes,
                    server_states: state.server_states,
                },
                exact: None,
            }
        }
        Algo::ExactGrr => {
            if let Some(f) = flows.iter().find(|f| f.rate.is_none()) {
                return Err(CliError::Failed(format!("exact-grr needs known rates; flow {} has none", f.id)));
            }
            solver.mode = ProblemMode::Grr(mode.horizon());
            let state = NetworkState {
                installed: previous.routes.clone(),
                ..base
            };
            let res = solve_grr(network, &state, flows, &solver).map_err(CliError::failed)?;
            let recomputed = match &res.solution {
                Some(sol) => objective_value(network, &state, flows, sol, solver.mode, solver.alpha)
                    .map_err(CliError::failed)?,
                None => f64::INFINITY,
            };
            Step {
                allocation: res.allocation,
                exact: Some(ExactSummary {
                    objective: res.objective,
                    recomputed,
                    status: res.status,
                }),
            }
        }
    })
}

fn validation_mode(algo: Algo, mode: Mode) -> ValidationOptions {
    match algo {
        Algo::Nsf => ValidationOptions::new(ProblemMode::Sfra).walk_mode(true),
        Algo::ExactSfra => ValidationOptions::new(ProblemMode::Sfra),
        _ => ValidationOptions::new(ProblemMode::Grr(mode.horizon())),
    }
}

fn check_allocation(
    network: &Network,
    scenario: &Scenario,
    flows: &[FlowSpec],
    previous: &[PowerState],
    allocation: &Allocation,
    mut opts: ValidationOptions,
    stand_in: f64,
) -> Result<ConstraintReport, CliError> {
    let (kept, sol) = allocation.to_solution(network, flows).map_err(CliError::failed)?;
    let state = NetworkState {
        server_states: previous.to_vec(),
        caps: scenario.caps,
        ..NetworkState::empty(network)
    };
    opts.stand_in_rate = Some(stand_in);
    let mut rep = check(network, &state, &kept, &sol, &opts).map_err(CliError::failed)?;
    // Report flows by id rather than by position among the carried ones.
    let ids: Vec<usize> = kept.iter().map(|f| f.id).collect();
    let mut relabeled = ConstraintReport::new();
    for id in rep.checked().collect::<Vec<_>>() {
        relabeled.mark_checked(id);
    }
    for mut v in rep.violations().to_vec() {
        v.flow = v.flow.map(|k| ids.get(k).copied().unwrap_or(k));
        relabeled.push(v);
    }
    rep = relabeled;
    Ok(rep)
}

fn qos_misses(rep: &ConstraintReport) -> usize {
    let mut flows: Vec<usize> = rep.violations_of(ConstraintId::Eq12).filter_map(|v| v.flow).collect();
    flows.sort_unstable();
    flows.dedup();
    flows.len()
}

pub const RUN_CSV_HEADER: &str = "iteration,algorithm,offered_rate,total_energy,reconf_overhead,max_link_util,avg_link_util,max_srv_util,avg_srv_util,rejected_flows,qos_misses,mean_path_length";

fn write_solutions(dir: &Path, flows: &[FlowSpec], allocation: &Allocation) -> Result<(), CliError> {
    for (f, r) in flows.iter().zip(&allocation.routes) {
        write(&dir.join(format!("flow_{}.txt", f.id)), &write_flow_solution(f, r.as_ref()))?;
    }
    write(&dir.join("servers.txt"), &write_server_states(&allocation.server_states))
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let algo = cfg.algo.ok_or_else(|| CliError::Usage("need --algo".into()))?;
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("need --out".into()))?;
    let mode = cfg.mode.unwrap_or(Mode::LongTerm);
    let iterations = cfg.iterations.unwrap_or(1);
    let stand_in = cfg.stand_in_rate.unwrap_or(DEFAULT_STAND_IN);
    let (mut network, scenario, seed) = load(cfg)?;
    let mut rng = rng_from_seed(seed);

    let mut flows = scenario.flows.clone();
    let mut previous = Allocation {
        routes: vec![None; flows.len()],
        server_states: network.initial_states(),
    };
    let mut csv = String::from(RUN_CSV_HEADER);
    csv.push('\n');
    let mut last = None;
    let started = Instant::now();
    for k in 1..=iterations {
        if k > 1 {
            flows = evolve_rates(&flows, &mut rng);
        }
        let step = allocate(algo, &mut network, &scenario, &flows, &previous, cfg)?;
        let rates = resolve_rates(&flows, Some(stand_in)).expect("stand-in given");
        let metrics = compute_metrics(&network, &flows, &rates, &previous.routes, &step.allocation)
            .map_err(CliError::failed)?;
        let rep = check_allocation(
            &network,
            &scenario,
            &flows,
            &previous.server_states,
            &step.allocation,
            validation_mode(algo, mode),
            stand_in,
        )?;
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            k,
            algo.name(),
            flows.iter().filter_map(|f| f.rate).sum::<f64>(),
            metrics.total_energy,
            metrics.reconfiguration_overhead,
            metrics.max_link_util,
            metrics.avg_link_util,
            metrics.max_server_util,
            metrics.avg_server_util,
            step.allocation.rejected_count(),
            qos_misses(&rep),
            metrics.mean_path_length().map(|v| v.to_string()).unwrap_or_default()
        );
        previous = step.allocation.clone();
        last = Some((step, rep, metrics));
    }
    let wall = started.elapsed();
    let (step, rep, metrics) = last.expect("at least one iteration");

    write(&out.join("scenario.txt"), &write_scenario(&scenario))?;
    write(&out.join("topology.txt"), &write_topology(&network))?;
    write(&out.join("metrics.csv"), &csv)?;
    write_solutions(&out.join("solutions"), &flows, &step.allocation)?;

    let mut report = String::new();
    let _ = writeln!(report, "algorithm {}", algo.name());
    let _ = writeln!(report, "mode {}", if mode == Mode::ShortTerm { "short-term" } else { "long-term" });
    let _ = writeln!(report, "iterations {iterations}");
    let _ = writeln!(report, "flows {}", flows.len());
    let _ = writeln!(report, "rejected {}", step.allocation.rejected_count());
    let _ = writeln!(report, "total_energy {}", metrics.total_energy);
    if let Some(e) = &step.exact {
        let status = match e.status {
            SolveStatus::Optimal => "optimal",
            SolveStatus::FeasibleTimeout => "feasible-timeout",
            SolveStatus::Infeasible => "infeasible",
        };
        let _ = writeln!(report, "status {status}");
        let _ = writeln!(report, "objective {}", e.objective);
        let _ = writeln!(report, "recomputed_objective {}", e.recomputed);
    }
    let _ = writeln!(report, "feasible {}", if rep.is_feasible() { "yes" } else { "no" });
    report.push_str(&rep.to_csv());
    write(&out.join("report.txt"), &report)?;

    println!(
        "{} flows, {} rejected, energy {}, {} iteration(s) in {:.3} s",
        flows.len(),
        step.allocation.rejected_count(),
        metrics.total_energy,
        iterations,
        wall.as_secs_f64()
    );
    if matches!(&step.exact, Some(e) if e.status == SolveStatus::Infeasible) {
        return Err(CliError::Failed("no feasible joint reallocation".into()));
    }
    Ok(())
}

pub struct SimulateOptions {
    pub replay: bool,
    pub grr_period: f64,
    pub threshold: f64,
    pub prediction_threshold: f64,
    pub end_time: Option<f64>,
}

pub fn simulate(cfg: &RunConfig, o: &SimulateOptions) -> Result<(), CliError> {
    let out = cfg.out.clone().ok_or_else(|| CliError::Usage("need --out".into()))?;
    let (network, scenario, seed) = load(cfg)?;
    if scenario.flows.iter().any(|f| f.rate.is_none()) {
        return Err(CliError::Failed("the controller needs a rate for every flow".into()));
    }
    let events = EventConfig {
        congestion_threshold: o.threshold,
        prediction_threshold: o.prediction_threshold,
        end_time: o.end_time,
        default_mfs: cfg.stand_in_rate.unwrap_or(DEFAULT_STAND_IN),
        ..EventConfig::with_grr_period(o.grr_period)
    };
    events.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut algo = AlgoConfig::default();
    if let Some(t) = cfg.time_budget {
        algo.rrr.time_budget = Duration::from_secs_f64(t);
    }
    let timeline = if o.replay {
        let iterations = cfg.iterations.expect("replay has iterations");
        let (tl, report) = orchestrator::replay(&network, &scenario, iterations, &mut rng_from_seed(seed), &events, &algo)
            .map_err(CliError::failed)?;
        let mut csv = String::from("iteration,t,offered_rate,total_energy,all_on_energy,reconf_overhead,rejected_flows\n");
        for r in &report {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                r.iteration, r.t, r.offered, r.total_energy, r.all_on_energy, r.reconfiguration_overhead, r.rejected_flows
            );
        }
        write(&out.join("iterations.csv"), &csv)?;
        tl
    } else {
        orchestrator::run(&network, &scenario, &events, &algo).map_err(CliError::failed)?
    };
    write(&out.join("scenario.txt"), &write_scenario(&scenario))?;
    write(&out.join("metrics.csv"), &timeline.to_csv())?;
    write(&out.join("events.log"), &timeline.log_text())?;
    let final_alloc = Allocation {
        routes: timeline.final_routes.clone(),
        server_states: timeline.final_states.clone(),
    };
    write_solutions(&out.join("solutions"), &scenario.flows, &final_alloc)?;
    println!(
        "{} reconfigurations, {} rejected at the end",
        timeline.rows.len(),
        timeline.rows.last().map(|r| r.rejected_flows).unwrap_or(0)
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Sfra,
    Energy,
    Grr,
}

pub struct ValidateOptions {
    pub topology: PathBuf,
    pub scenario: PathBuf,
    pub solution: PathBuf,
    pub problem: ProblemKind,
    pub mode: Mode,
    pub walk: bool,
    pub delay: bool,
    pub mu_l: Option<f64>,
    pub mu_s: Option<f64>,
}

fn solution_files(path: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let io = |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in std::fs::read_dir(path).map_err(io)? {
        let p = entry.map_err(io)?.path();
        if p.extension().is_some_and(|e| e == "txt") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn read_solutions(path: &Path, network: &Network) -> Result<SolutionFile, CliError> {
    let mut dump = SolutionFile::default();
    for p in solution_files(path)? {
        parse(&p, |t| parse_solution(t, network, &mut dump))?;
    }
    Ok(dump)
}

pub fn validate(o: &ValidateOptions) -> Result<(), CliError> {
    let network = parse(&o.topology, parse_topology)?;
    let mut scenario = parse(&o.scenario, |t| parse_scenario(t, &network))?;
    if let Some(v) = o.mu_l {
        scenario.caps.mu_l = v;
    }
    if let Some(v) = o.mu_s {
        scenario.caps.mu_s = v;
    }
    let dump = read_solutions(&o.solution, &network)?;
    let (kept, sol) = dump.to_solution(&network, &scenario.flows).map_err(CliError::failed)?;
    let mode = match o.problem {
        ProblemKind::Sfra => ProblemMode::Sfra,
        ProblemKind::Energy => ProblemMode::EnergySfra(o.mode.horizon()),
        ProblemKind::Grr => ProblemMode::Grr(o.mode.horizon()),
    };
    let mut opts = ValidationOptions::new(mode).walk_mode(o.walk);
    opts.check_delay = o.delay;
    let state = NetworkState {
        caps: scenario.caps,
        ..NetworkState::empty(&network)
    };
    let rep = check(&network, &state, &kept, &sol, &opts).map_err(CliError::failed)?;
    print!("{}", rep.to_csv());
    if rep.is_feasible() {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} violation(s)", rep.violations().len())))
    }
}

pub struct ExportOptions {
    pub topology: PathBuf,
    pub scenario: PathBuf,
    pub algo: Algo,
    pub mode: Mode,
    pub alpha: f64,
    pub flow: Option<usize>,
    pub installed: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn export_lp(o: &ExportOptions) -> Result<(), CliError> {
    let network = parse(&o.topology, parse_topology)?;
    let scenario = parse(&o.scenario, |t| parse_scenario(t, &network))?;
    let mode = match o.algo {
        Algo::ExactSfra => ProblemMode::Sfra,
        Algo::ExactEnergySfra => ProblemMode::EnergySfra(o.mode.horizon()),
        Algo::ExactGrr => ProblemMode::Grr(o.mode.horizon()),
        other => {
            return Err(CliError::Usage(format!(
                "{} has no model to export; use an exact-* algorithm",
                other.name()
            )))
        }
    };
    if !(0.0..=1.0).contains(&o.alpha) {
        return Err(CliError::Usage("--alpha must lie in [0, 1]".into()));
    }
    let flows: Vec<FlowSpec> = match o.flow {
        Some(id) => vec![scenario
            .flows
            .iter()
            .find(|f| f.id == id)
            .cloned()
            .ok_or_else(|| CliError::Usage(format!("no flow with id {id}")))?],
        None => scenario.flows.clone(),
    };
    let mut state = NetworkState {
        caps: scenario.caps,
        ..NetworkState::empty(&network)
    };
    if let Some(p) = &o.installed {
        let dump = read_solutions(p, &network)?;
        state.installed = dump.to_allocation(&flows, &network.initial_states()).routes;
    }
    let mut cfg = SolverConfig::new(mode).with_alpha(o.alpha);
    cfg.stand_in_rate = Some(DEFAULT_STAND_IN);
    let text = lp_text(&network, &state, &flows, &cfg).map_err(CliError::failed)?;
    write(&o.out, &text)?;
    println!("{} rows written to {}", sfc_core::exact::lp::row_count(&text), o.out.display());
    Ok(())
}
