use std::path::PathBuf;
use std::process;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;

use config::{Algo, Mode, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "sfc", version, about = "Service function chain allocation and reallocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a topology with servers and a flow scenario.
    Generate(GenerateArgs),
    /// Allocate every flow with one algorithm, once per iteration.
    Run(RunArgs),
    /// Drive the event-driven controller over a scenario.
    Simulate(SimulateArgs),
    /// Check a solution dump against every constraint of a problem mode.
    Validate(ValidateArgs),
    /// Write the linearized model as an LP file.
    ExportLp(ExportArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Scenario preset 1–5.
    #[arg(long)]
    preset: Option<u8>,
    /// Generator parameters as TOML, instead of a preset.
    #[arg(long)]
    params: Option<PathBuf>,
    /// Link list (`node`/`edge` lines); Abilene when omitted.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Default)]
struct InputArgs {
    /// Network file, or a link list together with --preset.
    #[arg(long)]
    topology: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Generate the instance from scenario preset 1–5.
    #[arg(long)]
    preset: Option<u8>,
    #[arg(long)]
    seed: Option<u64>,
    /// Idle power fraction applied to every server.
    #[arg(long)]
    delta: Option<f64>,
    /// Server capacity factor used when generating.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long = "mu-l")]
    mu_l: Option<f64>,
    #[arg(long = "mu-s")]
    mu_s: Option<f64>,
    /// Exact search budget in seconds.
    #[arg(long = "time-budget")]
    time_budget: Option<f64>,
    /// TOML file with defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl InputArgs {
    fn to_config(&self) -> RunConfig {
        RunConfig {
            topology: self.topology.clone(),
            scenario: self.scenario.clone(),
            preset: self.preset,
            seed: self.seed,
            delta: self.delta,
            theta: self.theta,
            mu_l: self.mu_l,
            mu_s: self.mu_s,
            time_budget: self.time_budget,
            ..RunConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum)]
    algo: Option<Algo>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Replay this many iterations with growing rates instead of following
    /// the scenario's arrival times.
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long = "grr-period", default_value_t = 1.0)]
    grr_period: f64,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long = "prediction-threshold", default_value_t = 1.0)]
    prediction_threshold: f64,
    #[arg(long = "end-time")]
    end_time: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum Problem {
    Sfra,
    Energy,
    Grr,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    /// Solution dump, or a directory whose `.txt` files are read in name order.
    #[arg(long)]
    solution: PathBuf,
    #[arg(long, value_enum, default_value = "sfra")]
    problem: Problem,
    #[arg(long, value_enum, default_value = "long-term")]
    mode: Mode,
    /// Check loop freedom per segment, for walks that revisit nodes.
    #[arg(long)]
    walk: bool,
    /// Skip the delay budget rows.
    #[arg(long = "no-delay")]
    no_delay: bool,
    #[arg(long = "mu-l")]
    mu_l: Option<f64>,
    #[arg(long = "mu-s")]
    mu_s: Option<f64>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, value_enum, default_value = "exact-grr")]
    algo: Algo,
    #[arg(long, value_enum, default_value = "long-term")]
    mode: Mode,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Export only this flow id.
    #[arg(long)]
    flow: Option<usize>,
    /// Installed routes for the reconfiguration term.
    #[arg(long)]
    installed: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn with_file_config(cli: RunConfig, path: Option<&PathBuf>) -> Result<RunConfig, error::CliError> {
    let merged = match path {
        Some(p) => cli.or(RunConfig::load(p)?),
        None => cli,
    };
    merged.check()?;
    Ok(merged)
}

fn dispatch(cli: Cli) -> Result<(), error::CliError> {
    match cli.command {
        Command::Generate(a) => commands::generate(&commands::GenerateOptions {
            preset: a.preset,
            params: a.params,
            topology: a.topology,
            seed: a.seed,
            theta: a.theta,
            delta: a.delta,
            out: a.out,
        }),
        Command::Run(a) => {
            let flags = RunConfig {
                algo: a.algo,
                mode: a.mode,
                alpha: a.alpha,
                iterations: a.iterations,
                out: a.out,
                ..a.input.to_config()
            };
            commands::run(&with_file_config(flags, a.input.config.as_ref())?)
        }
        Command::Simulate(a) => {
            let flags = RunConfig {
                iterations: a.iterations,
                out: a.out,
                ..a.input.to_config()
            };
            let cfg = with_file_config(flags, a.input.config.as_ref())?;
            commands::simulate(
                &cfg,
                &commands::SimulateOptions {
                    replay: a.iterations.is_some(),
                    grr_period: a.grr_period,
                    threshold: a.threshold,
                    prediction_threshold: a.prediction_threshold,
                    end_time: a.end_time,
                },
            )
        }
        Command::Validate(a) => commands::validate(&commands::ValidateOptions {
            topology: a.topology,
            scenario: a.scenario,
            solution: a.solution,
            problem: match a.problem {
                Problem::Sfra => commands::ProblemKind::Sfra,
                Problem::Energy => commands::ProblemKind::Energy,
                Problem::Grr => commands::ProblemKind::Grr,
            },
            mode: a.mode,
            walk: a.walk,
            delay: !a.no_delay,
            mu_l: a.mu_l,
            mu_s: a.mu_s,
        }),
        Command::ExportLp(a) => commands::export_lp(&commands::ExportOptions {
            topology: a.topology,
            scenario: a.scenario,
            algo: a.algo,
            mode: a.mode,
            alpha: a.alpha,
            flow: a.flow,
            installed: a.installed,
            out: a.out,
        }),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            process::exit(code);
        }
    };
    if let Err(e) = dispatch(cli) {
        eprintln!("sfc: {e}");
        process::exit(e.exit_code());
    }
}
