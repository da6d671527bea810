//! Run configuration: one TOML file with a global section and one optional
//! block per subcommand. Unknown keys are rejected everywhere.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use pseudoiid::kernel::Activation;
use pseudoiid::propagate::Probe;
use pseudoiid::regime::{Budget, Control, ConvBudget, SharedFilterControl};
use pseudoiid::weights::SamplerSpec;

use crate::error::CliError;
use crate::inputs::InputSpec;

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub sample: Option<SampleConfig>,
    pub check: Option<CheckConfig>,
    pub kernel: Option<KernelConfig>,
    pub simulate: Option<SweepConfig>,
    pub compare: Option<SweepConfig>,
    pub eoc: Option<EocConfig>,
    pub posterior: Option<PosteriorConfig>,
}

/// Draw one matrix per `dims` entry and write its nonzero triplets.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SampleConfig {
    pub spec: SamplerSpec,
    /// `[m, n]` pairs.
    pub dims: Vec<(usize, usize)>,
}

/// What a regime check is run on. Exactly one of `spec`, `control` and
/// `shared_filters` must be set.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Subject {
    pub label: Option<String>,
    pub spec: Option<SamplerSpec>,
    pub control: Option<Control>,
    pub shared_filters: Option<SharedFilterControl>,
    /// Classify as a convolution kernel under `check.conv`.
    #[serde(default)]
    pub conv: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub subjects: Vec<Subject>,
    #[serde(default)]
    pub budget: Option<Budget>,
    #[serde(default)]
    pub conv: Option<ConvBudget>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub activation: Activation,
    pub depth: usize,
    #[serde(default)]
    pub sigma_b2: f64,
    pub sigma_w2: f64,
    /// Filter size; set for convolutional kernels.
    pub k: Option<usize>,
    pub inputs: InputSpec,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
}

fn default_order() -> usize {
    pseudoiid::kernel::DEFAULT_ORDER
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchKind {
    Fcn,
    Cnn,
}

/// A grid of networks: every hidden-layer family at every width.
///
/// Layer sizes are `[input, width, ..., width]` with `depth + 1` weight
/// layers; the first layer is iid Gaussian with the family's `sigma_w2`.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub architecture: ArchKind,
    pub activation: Activation,
    pub depth: usize,
    pub widths: Vec<usize>,
    pub families: Vec<SamplerSpec>,
    #[serde(default)]
    pub sigma_b2: f64,
    /// Filter size for `architecture = "cnn"`.
    pub k: Option<usize>,
    pub inputs: InputSpec,
    pub probes: Vec<Probe>,
    pub trials: usize,
    #[serde(default = "default_bins")]
    pub bins: usize,
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct EocConfig {
    pub activation: Activation,
    pub sigma_b2: Vec<f64>,
    pub bracket: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PosteriorConfig {
    pub activation: Activation,
    pub depth: usize,
    #[serde(default)]
    pub sigma_b2: f64,
    pub sigma_w2: f64,
    #[serde(default)]
    pub noise: f64,
    pub data: PosteriorData,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PosteriorData {
    /// Points on the unit circle with targets `sin(3 theta)`.
    Toy { train: usize, test: usize },
    Explicit { train_x: Vec<Vec<f64>>, train_y: Vec<f64>, test_x: Vec<Vec<f64>> },
}

pub const PRESETS: &[(&str, &str)] = &[
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8", include_str!("../presets/fig8.toml")),
    ("fig9", include_str!("../presets/fig9.toml")),
    ("cauchy", include_str!("../presets/cauchy.toml")),
    ("orthogonal", include_str!("../presets/orthogonal.toml")),
    ("toy", include_str!("../presets/toy.toml")),
    ("eoc", include_str!("../presets/eoc.toml")),
];

pub fn preset(name: &str) -> Result<&'static str, CliError> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::config(format!("unknown preset `{name}`; available: {}", names.join(", ")), None)
    })
}

/// Parse TOML, reporting the dotted key path of the first offending key.
pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::config(e.to_string().trim().to_string(), None))?;
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let msg = e.into_inner().to_string();
        CliError::config(format!("{path}: {}", msg.trim()), Some(path))
    })
}

impl RunConfig {
    /// Block for `command`, or a config error naming the missing key.
    pub fn block<'a, T>(&'a self, command: &str, get: impl Fn(&'a RunConfig) -> Option<&'a T>) -> Result<&'a T, CliError> {
        get(self).ok_or_else(|| CliError::config(format!("missing key `{command}`"), Some(command.to_string())))
    }
}
