//! Experiment configuration: TOML/JSON schema, validation with field
//! diagnostics, and model construction.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use mfldp_core::{ConfinementPotential, GibbsModel, InteractionPotential, StateSpace};

use crate::events::SimplexEvent;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("missing config section `{0}`")]
    MissingSection(String),

    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },

    #[error("config kind `{config}` does not match subcommand `{requested}`")]
    KindMismatch { config: String, requested: String },
}

pub type ConfigResult<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Sample,
    Minimize,
    Rate,
    Zn,
    Verify,
    Converge,
    Wasserstein,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::Minimize => "minimize",
            ExperimentKind::Rate => "rate",
            ExperimentKind::Zn => "zn",
            ExperimentKind::Verify => "verify",
            ExperimentKind::Converge => "converge",
            ExperimentKind::Wasserstein => "wasserstein",
        }
    }
}

/// Top-level experiment configuration (TOML or JSON).
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub sample: Option<SampleConfig>,
    #[serde(default)]
    pub minimize: Option<MinimizeConfig>,
    #[serde(default)]
    pub rate: Option<RateConfig>,
    #[serde(default)]
    pub zn: Option<ZnConfig>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub converge: Option<ConvergeConfig>,
    #[serde(default)]
    pub wasserstein: Option<WassersteinConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub space: StateSpace,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
    #[serde(default)]
    pub confinement: Option<ConfinementPotential>,
    #[serde(default)]
    pub interactions: Vec<InteractionPotential>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    #[serde(default = "default_steps")]
    pub steps: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_thinning")]
    pub thinning: u64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub format: SampleFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    #[default]
    Csv,
    Binary,
}

fn default_steps() -> u64 {
    100_000
}
fn default_burn_in() -> u64 {
    10_000
}
fn default_thinning() -> u64 {
    10
}
fn default_sigma() -> f64 {
    0.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MinimizeConfig {
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
    #[serde(default = "default_damping")]
    pub damping: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GridScan,
    #[default]
    Parametric1d,
    FixedPoint,
}

fn default_mesh() -> f64 {
    1e-3
}
fn default_damping() -> f64 {
    0.5
}
fn default_tol() -> f64 {
    1e-8
}
fn default_max_iter() -> u64 {
    10_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub event: SimplexEvent,
    pub n_list: Vec<usize>,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_rate_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_decorrelation")]
    pub decorrelation: u64,
    /// When true (and the model is interaction-free) also run the exact
    /// method-of-types pipeline for cross-checking.
    #[serde(default)]
    pub exact_cross_check: bool,
}

fn default_replicas() -> usize {
    2000
}
fn default_rate_burn_in() -> u64 {
    5000
}
fn default_decorrelation() -> u64 {
    50
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZnConfig {
    pub n_list: Vec<usize>,
    /// Also run the thermodynamic-integration estimator at each n.
    #[serde(default)]
    pub estimate: bool,
    #[serde(default = "default_schedule_points")]
    pub schedule_points: usize,
    #[serde(default = "default_ti_steps")]
    pub steps: u64,
    #[serde(default = "default_rate_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_ti_thinning")]
    pub thinning: u64,
}

fn default_schedule_points() -> usize {
    21
}
fn default_ti_steps() -> u64 {
    40_000
}
fn default_ti_thinning() -> u64 {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_max_states")]
    pub max_states: usize,
    #[serde(default = "default_max_n")]
    pub max_n: usize,
}

fn default_instances() -> usize {
    100
}
fn default_max_states() -> usize {
    3
}
fn default_max_n() -> usize {
    5
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            instances: default_instances(),
            max_states: default_max_states(),
            max_n: default_max_n(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergeConfig {
    pub n_list: Vec<usize>,
    #[serde(default = "default_converge_replicas")]
    pub replicas: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub strategy: Strategy,
    #[serde(default = "default_mesh")]
    pub mesh: f64,
    #[serde(default = "default_rate_burn_in")]
    pub burn_in: u64,
    #[serde(default = "default_sweeps")]
    pub sweeps: u64,
}

fn default_converge_replicas() -> usize {
    20
}
fn default_p() -> f64 {
    1.0
}
fn default_sweeps() -> u64 {
    40
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WassersteinConfig {
    pub mu: PathBuf,
    pub nu: PathBuf,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default)]
    pub plan_csv: bool,
}

impl ExperimentConfig {
    /// Loads and parses a TOML or JSON config file.
    pub fn load(path: &Path) -> ConfigResult<(Self, String)> {
        let raw = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let is_json = path
            .extension()
            .map(|e| e.eq_ignore_ascii_case("json"))
            .unwrap_or(false)
            || raw.trim_start().starts_with('{');
        let config: ExperimentConfig = if is_json {
            serde_json::from_str(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            toml::from_str(&raw).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        Ok((config, raw))
    }

    /// Checks the config against the requested experiment kind.
    pub fn validate(&self, requested: ExperimentKind) -> ConfigResult<()> {
        if let Some(kind) = self.kind {
            if kind != requested {
                return Err(ConfigError::KindMismatch {
                    config: kind.name().into(),
                    requested: requested.name().into(),
                });
            }
        }
        let needs_model = !matches!(requested, ExperimentKind::Verify);
        if needs_model && self.model.is_none() {
            return Err(ConfigError::MissingSection("model".into()));
        }
        match requested {
            ExperimentKind::Sample if self.sample.is_none() => {
                Err(ConfigError::MissingSection("sample".into()))
            }
            ExperimentKind::Minimize if self.minimize.is_none() => {
                Err(ConfigError::MissingSection("minimize".into()))
            }
            ExperimentKind::Rate if self.rate.is_none() => {
                Err(ConfigError::MissingSection("rate".into()))
            }
            ExperimentKind::Zn if self.zn.is_none() => {
                Err(ConfigError::MissingSection("zn".into()))
            }
            ExperimentKind::Converge if self.converge.is_none() => {
                Err(ConfigError::MissingSection("converge".into()))
            }
            ExperimentKind::Wasserstein if self.wasserstein.is_none() => {
                Err(ConfigError::MissingSection("wasserstein".into()))
            }
            _ => Ok(()),
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> ConfigResult<GibbsModel> {
        match &self.space {
            StateSpace::Finite(f) => {
                let reference = self.reference.as_ref().ok_or_else(|| {
                    ConfigError::MissingSection("model.reference (m, v)".into())
                })?;
                if reference.m.len() != f.len() || reference.v.len() != f.len() {
                    return Err(ConfigError::Invalid {
                        field: "model.reference".into(),
                        message: format!("m and v must have {} entries", f.len()),
                    });
                }
                GibbsModel::new_finite(
                    self.space.clone(),
                    reference.m.clone(),
                    reference.v.clone(),
                    self.interactions.clone(),
                )
                .map_err(|e| ConfigError::Invalid {
                    field: "model".into(),
                    message: e.to_string(),
                })
            }
            StateSpace::Euclidean(e) => {
                let confinement = self
                    .confinement
                    .clone()
                    .unwrap_or(ConfinementPotential::Zero);
                GibbsModel::new_euclidean(e.clone(), confinement, self.interactions.clone())
                    .map_err(|e| ConfigError::Invalid {
                        field: "model".into(),
                        message: e.to_string(),
                    })
            }
        }
    }
}
