//! Experiment configuration: a TOML document with strict key checking.
//!
//! Unknown keys are hard errors (silent typos corrupt scientific runs) and
//! every range violation names the offending key. An empty document yields
//! the default experiment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coeffs::PresetParams;
use crate::convex::{ConvexError, ConvexPotential};
use crate::gexp::VolatilityBand;
use crate::harness::AveragingExperiment;
use crate::solver::Scheme;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config value out of range: {key}: {message}")]
    Range { key: String, message: String },
    #[error(transparent)]
    Potential(#[from] ConvexError),
}

fn range_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Range {
        key: key.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub sigma_low_sq: f64,
    pub sigma_high_sq: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        Self {
            sigma_low_sq: 1.0,
            sigma_high_sq: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PresetConfig {
    #[serde(default = "default_preset_name")]
    pub name: String,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_k_trunc")]
    pub k_trunc: usize,
    /// Number of diffusion components of the series presets.
    #[serde(default = "default_k_trunc")]
    pub noise_terms: usize,
    #[serde(default = "default_bs_drift")]
    pub bs_drift: f64,
    #[serde(default = "default_bs_qv_drift")]
    pub bs_qv_drift: f64,
    #[serde(default = "default_bs_vol")]
    pub bs_vol: f64,
}

fn default_preset_name() -> String {
    "decaying".into()
}
fn default_gamma() -> f64 {
    1.0
}
fn default_k_trunc() -> usize {
    1000
}
fn default_bs_drift() -> f64 {
    0.05
}
fn default_bs_qv_drift() -> f64 {
    0.02
}
fn default_bs_vol() -> f64 {
    0.2
}

impl Default for PresetConfig {
    fn default() -> Self {
        Self {
            name: default_preset_name(),
            gamma: default_gamma(),
            k_trunc: default_k_trunc(),
            noise_terms: default_k_trunc(),
            bs_drift: default_bs_drift(),
            bs_qv_drift: default_bs_qv_drift(),
            bs_vol: default_bs_vol(),
        }
    }
}

impl PresetConfig {
    pub fn params(&self) -> PresetParams {
        PresetParams {
            gamma: self.gamma,
            k_trunc: self.k_trunc,
            noise_terms: self.noise_terms,
            bs_drift: self.bs_drift,
            bs_qv_drift: self.bs_qv_drift,
            bs_vol: self.bs_vol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum PotentialConfig {
    IndicatorInterval { lo: f64, hi: f64 },
    IndicatorBox { bounds: Vec<(f64, f64)> },
    Quadratic { weight: f64 },
    Zero,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self::IndicatorInterval { lo: -5.0, hi: 5.0 }
    }
}

impl PotentialConfig {
    pub fn build(&self, dim: usize) -> Result<ConvexPotential, ConfigError> {
        Ok(match self {
            Self::IndicatorInterval { lo, hi } => ConvexPotential::indicator_interval(*lo, *hi)?,
            Self::IndicatorBox { bounds } => ConvexPotential::indicator_box(bounds.clone())?,
            Self::Quadratic { weight } => ConvexPotential::quadratic(dim, *weight)?,
            Self::Zero => ConvexPotential::zero(dim),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "snake_case")]
pub enum SchemeConfig {
    Projection,
    Penalization { eps_yosida: f64 },
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self::Projection
    }
}

impl SchemeConfig {
    pub fn scheme(&self) -> Scheme {
        match self {
            Self::Projection => Scheme::Projection,
            Self::Penalization { eps_yosida } => Scheme::Penalization {
                eps_yosida: *eps_yosida,
            },
        }
    }
}

/// Complete experiment configuration with defaults for every field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub p: f64,
    pub alpha: f64,
    /// Horizon scale `L` in `T(eps) = L * eps^{1/2 - alpha}`.
    pub horizon_scale: f64,
    pub t_max: f64,
    pub eps_list: Vec<f64>,
    pub paths_per_scenario: usize,
    pub constant_scenarios: usize,
    pub switching_scenarios: usize,
    pub switch_points: usize,
    pub steps_per_unit_time: usize,
    pub seed: u64,
    pub x0: f64,
    pub probes_delta2: Vec<f64>,
    pub output_dir: String,
    pub emit_paths: bool,
    pub band: BandConfig,
    pub preset: PresetConfig,
    pub potential: PotentialConfig,
    pub scheme: SchemeConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            p: 1.0,
            alpha: 0.25,
            horizon_scale: 1.0,
            t_max: 16.0,
            eps_list: vec![0.1, 0.03, 0.01, 0.003],
            paths_per_scenario: 200,
            constant_scenarios: 5,
            switching_scenarios: 3,
            switch_points: 4,
            steps_per_unit_time: 512,
            seed: 42,
            x0: 1.0,
            probes_delta2: vec![0.5, 0.1],
            output_dir: "out".into(),
            emit_paths: false,
            band: BandConfig::default(),
            preset: PresetConfig::default(),
            potential: PotentialConfig::default(),
            scheme: SchemeConfig::default(),
        }
    }
}

/// Parse and validate a TOML configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let config: ExperimentConfig = toml::from_str(text)?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.p < 1.0 {
            return Err(range_err("p", format!("must be >= 1, got {}", self.p)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(range_err(
                "alpha",
                format!("must lie in (0, 1), got {}", self.alpha),
            ));
        }
        if !(self.horizon_scale > 0.0) {
            return Err(range_err(
                "horizon_scale",
                format!("must be > 0, got {}", self.horizon_scale),
            ));
        }
        if !(self.t_max > 0.0) {
            return Err(range_err(
                "t_max",
                format!("must be > 0, got {}", self.t_max),
            ));
        }
        if self.eps_list.is_empty() {
            return Err(range_err("eps_list", "must not be empty"));
        }
        if self.eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(range_err(
                "eps_list",
                format!("entries must lie in (0, 1], got {:?}", self.eps_list),
            ));
        }
        if self.eps_list.windows(2).any(|w| w[0] <= w[1]) {
            return Err(range_err(
                "eps_list",
                format!("must be strictly decreasing, got {:?}", self.eps_list),
            ));
        }
        if self.paths_per_scenario == 0 {
            return Err(range_err("paths_per_scenario", "must be >= 1"));
        }
        if self.constant_scenarios < 2 {
            return Err(range_err(
                "constant_scenarios",
                format!("must be >= 2, got {}", self.constant_scenarios),
            ));
        }
        if self.steps_per_unit_time == 0 {
            return Err(range_err("steps_per_unit_time", "must be >= 1"));
        }
        if self.probes_delta2.is_empty() || self.probes_delta2.iter().any(|&d| !(d > 0.0)) {
            return Err(range_err(
                "probes_delta2",
                format!("entries must be > 0, got {:?}", self.probes_delta2),
            ));
        }
        if VolatilityBand::new(self.band.sigma_low_sq, self.band.sigma_high_sq).is_err() {
            return Err(range_err(
                "band",
                format!(
                    "need 0 <= sigma_low_sq <= sigma_high_sq and sigma_high_sq > 0, got [{}, {}]",
                    self.band.sigma_low_sq, self.band.sigma_high_sq
                ),
            ));
        }
        if self.preset.k_trunc == 0 || self.preset.noise_terms == 0 {
            return Err(range_err(
                "preset.k_trunc",
                "series truncation and noise_terms must be >= 1",
            ));
        }
        if self.preset.gamma < 0.0 {
            return Err(range_err(
                "preset.gamma",
                format!("must be >= 0, got {}", self.preset.gamma),
            ));
        }
        if !matches!(
            self.preset.name.as_str(),
            "example4" | "decaying" | "zero" | "bs_market"
        ) {
            return Err(range_err(
                "preset.name",
                format!(
                    "unknown preset '{}' (known: example4, decaying, zero, bs_market)",
                    self.preset.name
                ),
            ));
        }
        if let SchemeConfig::Penalization { eps_yosida } = self.scheme {
            if !(eps_yosida > 0.0) {
                return Err(range_err(
                    "scheme.eps_yosida",
                    format!("must be > 0, got {eps_yosida}"),
                ));
            }
        }
        // Probe the potential parameters early so errors surface at parse time.
        self.potential.build(1)?;
        Ok(())
    }

    pub fn band(&self) -> VolatilityBand {
        VolatilityBand::new(self.band.sigma_low_sq, self.band.sigma_high_sq)
            .expect("validated band")
    }

    /// Realize the experiment description consumed by the harness.
    pub fn experiment(&self) -> Result<AveragingExperiment, ConfigError> {
        Ok(AveragingExperiment {
            preset_name: self.preset.name.clone(),
            preset_params: self.preset.params(),
            band: self.band(),
            potential: self.potential.build(1)?,
            scheme: self.scheme.scheme(),
            x0: self.x0,
            p: self.p,
            eps_list: self.eps_list.clone(),
            horizon_scale: self.horizon_scale,
            alpha: self.alpha,
            t_max: self.t_max,
            paths_per_scenario: self.paths_per_scenario,
            n_constant: self.constant_scenarios,
            n_switching: self.switching_scenarios,
            switch_points: self.switch_points,
            base_seed: self.seed,
            steps_per_unit_time: self.steps_per_unit_time,
            probes_delta2: self.probes_delta2.clone(),
        })
    }
}
