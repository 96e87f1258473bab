use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Deserialize;

use sfc_core::model::Horizon;

use crate::error::{read, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Nsf,
    #[value(name = "3r")]
    #[serde(rename = "3r")]
    Rrr,
    StEnsf,
    LtEnsf,
    ExactSfra,
    ExactEnergySfra,
    ExactGrr,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Nsf => "nsf",
            Algo::Rrr => "3r",
            Algo::StEnsf => "st-ensf",
            Algo::LtEnsf => "lt-ensf",
            Algo::ExactSfra => "exact-sfra",
            Algo::ExactEnergySfra => "exact-energy-sfra",
            Algo::ExactGrr => "exact-grr",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    ShortTerm,
    LongTerm,
}

impl Mode {
    pub fn horizon(self) -> Horizon {
        match self {
            Mode::ShortTerm => Horizon::ShortTerm,
            Mode::LongTerm => Horizon::LongTerm,
        }
    }
}

/// Settings read from `--config`. Every field is optional; flags win.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub topology: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub preset: Option<u8>,
    pub algo: Option<Algo>,
    pub mode: Option<Mode>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub theta: Option<f64>,
    pub mu_l: Option<f64>,
    pub mu_s: Option<f64>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub out: Option<PathBuf>,
    pub time_budget: Option<f64>,
    /// Rate assumed for flows of unknown size.
    pub stand_in_rate: Option<f64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = read(path)?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    /// Fill every unset field of `self` from `other`.
    pub fn or(self, other: RunConfig) -> RunConfig {
        RunConfig {
            topology: self.topology.or(other.topology),
            scenario: self.scenario.or(other.scenario),
            preset: self.preset.or(other.preset),
            algo: self.algo.or(other.algo),
            mode: self.mode.or(other.mode),
            alpha: self.alpha.or(other.alpha),
            delta: self.delta.or(other.delta),
            theta: self.theta.or(other.theta),
            mu_l: self.mu_l.or(other.mu_l),
            mu_s: self.mu_s.or(other.mu_s),
            seed: self.seed.or(other.seed),
            iterations: self.iterations.or(other.iterations),
            out: self.out.or(other.out),
            time_budget: self.time_budget.or(other.time_budget),
            stand_in_rate: self.stand_in_rate.or(other.stand_in_rate),
        }
    }

    pub fn check(&self) -> Result<(), CliError> {
        let usage = |m: &str| Err(CliError::Usage(m.into()));
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return usage("--alpha must lie in [0, 1]");
            }
        }
        if let Some(d) = self.delta {
            if !(0.0..=1.0).contains(&d) {
                return usage("--delta must lie in [0, 1]");
            }
        }
        for (name, v) in [
            ("--theta", self.theta),
            ("--mu-l", self.mu_l),
            ("--mu-s", self.mu_s),
            ("--time-budget", self.time_budget),
            ("stand_in_rate", self.stand_in_rate),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return usage(&format!("{name} must be positive"));
                }
            }
        }
        if self.iterations == Some(0) {
            return usage("--iterations must be at least 1");
        }
        if let Some(k) = self.preset {
            if !(1..=5).contains(&k) {
                return usage("--preset must be between 1 and 5");
            }
        }
        match (&self.preset, &self.scenario) {
            (Some(_), Some(_)) => usage("give either --preset or --scenario, not both"),
            (None, None) => usage("need --scenario (with --topology) or --preset"),
            (None, Some(_)) if self.topology.is_none() => usage("--scenario needs --topology"),
            (None, Some(_)) if self.theta.is_some() => usage("--theta only applies when generating from --preset"),
            _ => Ok(()),
        }
    }
}
