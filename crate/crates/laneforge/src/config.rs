//! Run configuration and dataset presets.
//!
//! A `RunConfig` bundles every tunable the pipeline needs: heat-map
//! supervision (`sigma`, `t_theta`), segment radius `e`, anchor budget,
//! loss weights, input size, and the seed all randomness flows from.
//! The two dataset presets carry the published hyperparameters; `custom`
//! starts from the culane numbers and expects flag overrides.

use crate::geometry::{GeometryError, SliceScheme};
use crate::losses::{GliouParams, LossWeights};
use crate::targets::{TargetConfig, TargetError};
use serde::{Deserialize, Serialize};

/// Errors from building or validating a configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownPreset { got: String },
    InvalidValue { what: &'static str, reason: String },
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::UnknownPreset { got } => write!(f, "unknown preset \"{got}\""),
            ConfigError::InvalidValue { what, reason } => write!(f, "invalid {what}: {reason}"),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Dataset preset selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Culane,
    Tusimple,
    Custom,
}

impl Preset {
    pub fn from_name(name: &str) -> Result<Self, ConfigError> {
        match name {
            "culane" => Ok(Preset::Culane),
            "tusimple" => Ok(Preset::Tusimple),
            "custom" => Ok(Preset::Custom),
            other => Err(ConfigError::UnknownPreset {
                got: other.to_string(),
            }),
        }
    }
}

/// Full run configuration. Fields are public so flag overrides can patch
/// individual values after choosing a preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: Preset,
    /// Gaussian radius of heat-map supervision, in grid cells.
    pub sigma: f64,
    /// Heat-map threshold gating the theta map and its valid mask.
    pub t_theta: f64,
    /// Segment radius for the overlap losses, in pixels.
    pub e: f64,
    /// Number of proposals decoded from the heat map.
    pub n_anchors: usize,
    pub weights: LossWeights,
    pub input_w: u32,
    pub input_h: u32,
    /// Heat-map stride relative to the input image.
    pub downsample: u32,
    /// Number of horizontal slices lanes are sampled on.
    pub slices: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn culane() -> Self {
        RunConfig {
            preset: Preset::Culane,
            sigma: 4.0,
            t_theta: 0.5,
            e: 15.0,
            n_anchors: 300,
            weights: LossWeights {
                w_reg: 6.0,
                w_cls: 6.0,
                w_hm: 2.0,
                w_theta: 3.0,
            },
            input_w: 800,
            input_h: 320,
            downsample: 8,
            slices: 72,
            seed: 0,
        }
    }

    pub fn tusimple() -> Self {
        RunConfig {
            preset: Preset::Tusimple,
            sigma: 2.0,
            t_theta: 0.2,
            e: 15.0,
            n_anchors: 100,
            weights: LossWeights {
                w_reg: 10.0,
                w_cls: 10.0,
                w_hm: 10.0,
                w_theta: 1.0,
            },
            input_w: 800,
            input_h: 320,
            downsample: 8,
            slices: 72,
            seed: 0,
        }
    }

    pub fn custom() -> Self {
        RunConfig {
            preset: Preset::Custom,
            ..RunConfig::culane()
        }
    }

    pub fn from_preset(preset: Preset) -> Self {
        match preset {
            Preset::Culane => RunConfig::culane(),
            Preset::Tusimple => RunConfig::tusimple(),
            Preset::Custom => RunConfig::custom(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(ConfigError::InvalidValue {
                what: "sigma",
                reason: format!("{} is not positive", self.sigma),
            });
        }
        if !(self.t_theta.is_finite() && self.t_theta > 0.0 && self.t_theta < 1.0) {
            return Err(ConfigError::InvalidValue {
                what: "t_theta",
                reason: format!("{} is outside (0, 1)", self.t_theta),
            });
        }
        if !(self.e.is_finite() && self.e > 0.0) {
            return Err(ConfigError::InvalidValue {
                what: "e",
                reason: format!("{} is not positive", self.e),
            });
        }
        if self.n_anchors == 0 {
            return Err(ConfigError::InvalidValue {
                what: "n_anchors",
                reason: "must be at least 1".into(),
            });
        }
        if self.input_w == 0 || self.input_h == 0 {
            return Err(ConfigError::InvalidValue {
                what: "input size",
                reason: format!("{}x{} has a zero side", self.input_w, self.input_h),
            });
        }
        if self.downsample == 0 {
            return Err(ConfigError::InvalidValue {
                what: "downsample",
                reason: "must be at least 1".into(),
            });
        }
        if self.slices < 2 {
            return Err(ConfigError::InvalidValue {
                what: "slices",
                reason: "need at least 2 slices".into(),
            });
        }
        Ok(())
    }

    /// Uniform slice scheme over the configured input size.
    pub fn scheme(&self) -> Result<SliceScheme, GeometryError> {
        SliceScheme::uniform(self.slices, self.input_w, self.input_h)
    }

    /// Heat-map target parameters.
    pub fn target_config(&self) -> Result<TargetConfig, TargetError> {
        TargetConfig::new(self.sigma, self.t_theta, self.downsample)
    }

    pub fn gliou_params(&self) -> GliouParams {
        GliouParams { e: self.e }
    }

    /// Heat-map grid size (width, height) implied by input size and stride.
    pub fn grid_size(&self) -> (usize, usize) {
        (
            (self.input_w / self.downsample) as usize,
            (self.input_h / self.downsample) as usize,
        )
    }
}
