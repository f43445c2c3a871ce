//! Run configuration: a TOML file merged with command-line overrides.

use std::fs;
use std::path::{Path, PathBuf};

use growthnet::asymptotic::RegimeChoice;
use growthnet::exact::ExactConfig;
use growthnet::simulate::SimConfig;
use growthnet::{FilamentClass, NetworkModel, RegimeThresholds};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    Asymptotic,
    Simulate,
    Compare,
    Fleet,
    Bottleneck,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Asymptotic => "asymptotic",
            Method::Simulate => "simulate",
            Method::Compare => "compare",
            Method::Fleet => "fleet",
            Method::Bottleneck => "bottleneck",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub m: u64,
    pub classes: Vec<FilamentClass>,
}

impl ModelSpec {
    pub fn build(&self) -> growthnet::Result<NetworkModel> {
        let specs: Vec<(f64, u64)> = self.classes.iter().map(|c| (c.kappa, c.count)).collect();
        NetworkModel::new(self.m, &specs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSection {
    pub regime: RegimeChoice,
    pub thresholds: RegimeThresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FleetSpec {
    pub route_load: f64,
    pub locations: u64,
    /// Service level to dimension for.
    pub target_alpha: Option<f64>,
    /// Fleet size to evaluate.
    pub customers: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BottleneckSpec {
    pub m: u64,
    pub poisson_means: Vec<f64>,
    pub geo_utilizations: Vec<f64>,
    /// Zero-based geometric node; all nodes when absent.
    pub node: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Format,
}

/// Everything one invocation needs. Serialized verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub asymptotic: AsymptoticSection,
    pub simulation: Option<SimConfig>,
    #[serde(default)]
    pub exact: ExactConfig,
    pub fleet: Option<FleetSpec>,
    pub bottleneck: Option<BottleneckSpec>,
    #[serde(default)]
    pub output: OutputSection,
}

/// The config file: like [`RunConfig`] but every section optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub method: Option<Method>,
    pub model: Option<PartialModel>,
    pub asymptotic: Option<AsymptoticSection>,
    pub simulation: Option<SimConfig>,
    pub exact: Option<ExactConfig>,
    pub fleet: Option<PartialFleet>,
    pub bottleneck: Option<PartialBottleneck>,
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialModel {
    pub m: Option<u64>,
    #[serde(default)]
    pub classes: Vec<FilamentClass>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialFleet {
    pub route_load: Option<f64>,
    pub locations: Option<u64>,
    pub target_alpha: Option<f64>,
    pub customers: Option<u64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialBottleneck {
    pub m: Option<u64>,
    #[serde(default)]
    pub poisson_means: Vec<f64>,
    #[serde(default)]
    pub geo_utilizations: Vec<f64>,
    pub node: Option<usize>,
}

pub fn read_file_config(path: &Path) -> Result<FileConfig, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    toml::from_str(&text).map_err(|e| format!("malformed config {}: {e}", path.display()))
}

/// `kappa:count`, e.g. `2.5:10`.
pub fn parse_class(s: &str) -> Result<FilamentClass, String> {
    let (k, c) = s
        .split_once(':')
        .ok_or_else(|| format!("expected kappa:count, got {s:?}"))?;
    let kappa = k
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad kappa in {s:?}: {e}"))?;
    let count = c
        .trim()
        .parse::<u64>()
        .map_err(|e| format!("bad count in {s:?}: {e}"))?;
    Ok(FilamentClass { kappa, count })
}

pub fn parse_regime(s: &str) -> Result<RegimeChoice, String> {
    match s {
        "auto" => Ok(RegimeChoice::Auto),
        "linear" => Ok(RegimeChoice::Linear),
        "overloaded" => Ok(RegimeChoice::Overloaded),
        "underloaded" => Ok(RegimeChoice::Underloaded),
        _ => Err(format!(
            "unknown regime {s:?}; expected auto, linear, overloaded or underloaded"
        )),
    }
}
