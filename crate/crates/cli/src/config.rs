//! TOML run configurations, one schema per command.

use serde::{Deserialize, Serialize};

use l1tik::operators::OperatorSpec;
use l1tik::rates::SolverSettings;
use l1tik::source_conditions::{GammaRule, TailMode};
use l1tik::{NormKind, SequenceModel};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveConfig {
    pub operator: OperatorSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_norm: Option<NormKind>,
    #[serde(default = "two")]
    pub p: f64,
    pub alpha: f64,
    #[serde(default)]
    pub elastic_eta: f64,
    /// Inline data `y^δ`; mutually exclusive with `model`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<f64>>,
    /// Synthesize `y = A x†`, plus noise of level `delta` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<SequenceModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverSettings,
}

fn two() -> f64 {
    2.0
}

impl SolveConfig {
    pub fn image_norm(&self) -> NormKind {
        self.image_norm.unwrap_or(if self.p == 1.0 {
            NormKind::L1
        } else {
            NormKind::L2
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for LogGrid {
    fn default() -> Self {
        Self {
            lo: 1e-8,
            hi: 1.0,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub model: SequenceModel,
    pub gamma: GammaRule,
    pub n_max: usize,
    #[serde(default)]
    pub grid: LogGrid,
}

fn default_tail() -> TailMode {
    TailMode::Alternating
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessConfig {
    pub xi: Vec<f64>,
    pub mu: f64,
    #[serde(default = "default_tail")]
    pub tail: TailMode,
    /// Truncation level of η.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditioningConfig {
    pub operator: OperatorSpec,
    pub n_grid: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProbeConfig {
    ConstantOne,
    Explicit { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakStarConfig {
    pub operator: OperatorSpec,
    pub count: usize,
    pub probe: ProbeConfig,
}

fn default_samples() -> usize {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VscConfig {
    pub operator: OperatorSpec,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_norm: Option<NormKind>,
    pub model: SequenceModel,
    pub gamma: GammaRule,
    /// `β = (1 − μ)/(1 + μ)`.
    pub mu: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_dual() -> NormKind {
    NormKind::L2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GammaConfig {
    pub operator: OperatorSpec,
    pub n: usize,
    pub n_max: usize,
    #[serde(default = "default_dual")]
    pub dual_norm: NormKind,
}

pub fn parse<T: serde::de::DeserializeOwned>(text: &str) -> Result<T, CliError> {
    toml::from_str(text)
        .map_err(|e| CliError::Validation(format!("config: {}", e.to_string().trim_end())))
}

pub fn echo<T: Serialize>(config: &T) -> Result<String, CliError> {
    toml::to_string(config).map_err(|e| CliError::Validation(format!("config: {e}")))
}
