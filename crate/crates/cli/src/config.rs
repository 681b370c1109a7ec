//! JSON configuration files accepted by the subcommands.

use std::path::PathBuf;

use dirmean::{DistributionSpec, LowerBoundConfig, MeanConfig, SmallBallConfig};
use serde::Deserialize;

fn default_delta() -> f64 {
    0.01
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    /// Headerless CSV of observations; takes precedence over `distribution`.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub distribution: Option<DistributionSpec>,
    /// Rows to draw when generating from `distribution`.
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Uniform noise scale added before estimation.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub mean: MeanConfig,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            data: None,
            distribution: None,
            rows: None,
            delta: default_delta(),
            jitter: 0.0,
            mean: MeanConfig::default(),
        }
    }
}

fn default_sample() -> usize {
    10_000
}

fn default_param() -> f64 {
    0.02
}

fn default_dirs() -> usize {
    100
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub distribution: DistributionSpec,
    /// Size of the one-dimensional sample for the ratio properties.
    #[serde(default = "default_sample")]
    pub sample_size: usize,
    /// The accuracy parameter `Delta`.
    #[serde(default = "default_param")]
    pub delta_param: f64,
    /// Trimming fraction; defaults to `7 * delta_param`.
    #[serde(default)]
    pub theta: Option<f64>,
    /// Rows fed to the variance blocks for the uniform ratio check.
    #[serde(default)]
    pub ratio_rows: Option<usize>,
    /// Minimum block deviation; defaults to the spectral critical level.
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default = "default_dirs")]
    pub n_dirs: usize,
    #[serde(default)]
    pub variance: dirmean::VarianceConfig,
    #[serde(default)]
    pub small_ball: SmallBallConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBoundFile {
    pub distribution: DistributionSpec,
    #[serde(default, flatten)]
    pub experiment: LowerBoundConfig,
}
