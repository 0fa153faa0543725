//! TOML formats for network configs and experiment specs.
//!
//! A network config:
//!
//! ```toml
//! channel_reliability = [0.25, 0.5, 0.75, 1.0]
//! arrival_rate = [0.2, 0.15, 0.1, 0.05]
//! weight = [4, 4, 1, 1]
//! horizon = 200000   # optional
//! seed = 1           # optional
//! ```
//!
//! An experiment spec replaces `arrival_rate` by a per-stream
//! `arrival_multiplier` and a list of swept `lambdas`; stream `i` then has
//! arrival rate `arrival_multiplier[i] * lambda`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use super::CliError;
use crate::analysis::DEFAULT_DELTA;
use crate::model::{NetworkConfig, QueueDiscipline};

pub const DEFAULT_HORIZON: u64 = 200_000;
pub const DEFAULT_REPLICATIONS: usize = 5;
pub const FULL_HORIZON: u64 = 2_000_000;
pub const FULL_REPLICATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    OptimalRandomized,
    MaxWeight,
    Naive,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 3] = [
        PolicyKind::OptimalRandomized,
        PolicyKind::MaxWeight,
        PolicyKind::Naive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::OptimalRandomized => "optimal-randomized",
            PolicyKind::MaxWeight => "max-weight",
            PolicyKind::Naive => "naive",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "optimalrandomized" | "randomized" | "optimal" => Ok(PolicyKind::OptimalRandomized),
            "maxweight" | "mw" => Ok(PolicyKind::MaxWeight),
            "naive" | "uniform" => Ok(PolicyKind::Naive),
            _ => Err(format!(
                "unknown policy '{s}' (expected optimal-randomized, max-weight or naive)"
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    channel_reliability: Vec<f64>,
    arrival_rate: Vec<f64>,
    weight: Vec<f64>,
    #[serde(default = "default_horizon")]
    horizon: u64,
    #[serde(default)]
    seed: u64,
}

fn default_horizon() -> u64 {
    DEFAULT_HORIZON
}

fn default_replications() -> usize {
    DEFAULT_REPLICATIONS
}

fn default_seed() -> u64 {
    1
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn all_disciplines() -> Vec<String> {
    QueueDiscipline::ALL.iter().map(|d| d.as_str().to_string()).collect()
}

fn all_policies() -> Vec<String> {
    PolicyKind::ALL.iter().map(|p| p.as_str().to_string()).collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    channel_reliability: Vec<f64>,
    weight: Vec<f64>,
    arrival_multiplier: Vec<f64>,
    lambdas: Vec<f64>,
    #[serde(default = "all_disciplines")]
    disciplines: Vec<String>,
    #[serde(default = "all_policies")]
    policies: Vec<String>,
    #[serde(default = "default_horizon")]
    horizon: u64,
    #[serde(default = "default_replications")]
    replications: usize,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_delta")]
    delta: f64,
    output: Option<PathBuf>,
}

/// A λ sweep over a parametric family of networks.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub channel_reliability: Vec<f64>,
    pub weight: Vec<f64>,
    pub arrival_multiplier: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub disciplines: Vec<QueueDiscipline>,
    pub policies: Vec<PolicyKind>,
    pub horizon: u64,
    pub replications: usize,
    pub seed: u64,
    pub delta: f64,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    /// The network at sweep value `lambda`.
    pub fn config_at(&self, lambda: f64) -> Result<NetworkConfig, CliError> {
        let rates = self.arrival_multiplier.iter().map(|m| m * lambda).collect();
        NetworkConfig::new(
            self.channel_reliability.clone(),
            rates,
            self.weight.clone(),
            self.horizon,
            self.seed,
        )
        .map_err(|e| CliError::Invalid(format!("at lambda = {lambda}: {e}")))
    }

    pub fn use_full_settings(&mut self) {
        self.horizon = FULL_HORIZON;
        self.replications = FULL_REPLICATIONS;
    }

    fn validate(&self) -> Result<(), CliError> {
        for (k, &l) in self.lambdas.iter().enumerate() {
            if !(l > 0.0 && l <= 1.0) {
                return Err(CliError::Invalid(format!(
                    "lambdas[{k}] = {l} must be in (0, 1]"
                )));
            }
            self.config_at(l)?;
        }
        if self.lambdas.is_empty() {
            // still check the static fields
            NetworkConfig::new(
                self.channel_reliability.clone(),
                vec![1.0; self.channel_reliability.len()],
                self.weight.clone(),
                self.horizon,
                self.seed,
            )?;
            if self.arrival_multiplier.len() != self.channel_reliability.len() {
                return Err(CliError::Invalid(format!(
                    "arrival_multiplier has {} entries, expected {}",
                    self.arrival_multiplier.len(),
                    self.channel_reliability.len()
                )));
            }
        }
        if self.replications == 0 {
            return Err(CliError::Invalid("replications must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(CliError::Invalid(format!("delta = {} must be positive", self.delta)));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_error(origin: &str, e: toml::de::Error) -> CliError {
    CliError::Parse {
        origin: origin.to_string(),
        message: e.to_string(),
    }
}

pub fn parse_config(text: &str, origin: &str) -> Result<NetworkConfig, CliError> {
    let f: ConfigFile = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    Ok(NetworkConfig::new(
        f.channel_reliability,
        f.arrival_rate,
        f.weight,
        f.horizon,
        f.seed,
    )?)
}

pub fn load_config(path: &Path) -> Result<NetworkConfig, CliError> {
    parse_config(&read(path)?, &path.display().to_string())
}

pub fn parse_spec(text: &str, origin: &str) -> Result<ExperimentSpec, CliError> {
    let f: SpecFile = toml::from_str(text).map_err(|e| parse_error(origin, e))?;
    let disciplines = f
        .disciplines
        .iter()
        .map(|s| s.parse::<QueueDiscipline>().map_err(|e| CliError::Invalid(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let policies = f
        .policies
        .iter()
        .map(|s| s.parse::<PolicyKind>().map_err(CliError::Invalid))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = ExperimentSpec {
        channel_reliability: f.channel_reliability,
        weight: f.weight,
        arrival_multiplier: f.arrival_multiplier,
        lambdas: f.lambdas,
        disciplines,
        policies,
        horizon: f.horizon,
        replications: f.replications,
        seed: f.seed,
        delta: f.delta,
        output: f.output,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, CliError> {
    parse_spec(&read(path)?, &path.display().to_string())
}
