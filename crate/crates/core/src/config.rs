//! Flat JSON run configuration shared by every pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gating::GatingConfig;
use crate::geometry::{Intrinsics, OverlapConfig};
use crate::simworld::{DriftConfig, EpisodeConfig, SceneSpec};
use crate::trajectory::{CameraRig, DEFAULT_SEGMENT_LENGTH};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{0}")]
    Parse(String),
    #[error("unsupported config version {0} (expected {CONFIG_VERSION})")]
    Version(u32),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub version: u32,
    pub score_threshold: f64,
    pub distance_threshold: f64,
    pub temporal_threshold: u32,
    pub distance_weight: f64,
    pub grid: usize,
    pub sample_depth: f64,
    pub scene_diameter: f64,
    /// Temporal memory window half-width, frames.
    pub window: usize,
    /// Token patch size, pixels.
    pub patch: usize,
    pub sigma0: f64,
    pub segment_length: usize,
    pub width: u32,
    pub height: u32,
    pub hfov_deg: f64,
    pub scene_seed: u64,
    pub boxes: usize,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let gating = GatingConfig::default();
        let scene = SceneSpec::default();
        RunConfig {
            version: CONFIG_VERSION,
            score_threshold: gating.score_threshold,
            distance_threshold: gating.distance_threshold,
            temporal_threshold: gating.temporal_threshold,
            distance_weight: gating.overlap.distance_weight,
            grid: gating.overlap.grid,
            sample_depth: gating.overlap.sample_depth,
            scene_diameter: gating.overlap.scene_diameter,
            window: 2,
            patch: 16,
            sigma0: DriftConfig::default().sigma0,
            segment_length: DEFAULT_SEGMENT_LENGTH,
            width: 128,
            height: 128,
            hfov_deg: 60.0,
            scene_seed: scene.seed,
            boxes: scene.boxes,
            seed: 0,
        }
    }
}

impl RunConfig {
    /// Parses and validates a config document. Missing keys take defaults;
    /// unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        let version = value
            .get("version")
            .ok_or_else(|| ConfigError::Parse("missing field `version`".into()))?;
        match version.as_u64() {
            Some(v) if v == CONFIG_VERSION as u64 => {}
            Some(v) => return Err(ConfigError::Version(v as u32)),
            None => return Err(ConfigError::Parse("`version` must be an integer".into())),
        }
        let cfg: RunConfig =
            serde_json::from_value(value).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.gating().validate().map_err(|e| invalid(&e))?;
        self.episode().validate().map_err(|e| invalid(&e))?;
        if self.segment_length == 0 {
            return Err(ConfigError::Invalid("segment_length must be at least 1".into()));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ConfigError::Invalid("width and height must be at least 1".into()));
        }
        if !(self.hfov_deg > 0.0 && self.hfov_deg < 180.0) {
            return Err(ConfigError::Invalid("hfov_deg must lie in (0, 180)".into()));
        }
        Ok(())
    }

    pub fn overlap(&self) -> OverlapConfig {
        OverlapConfig {
            grid: self.grid,
            sample_depth: self.sample_depth,
            scene_diameter: self.scene_diameter,
            distance_weight: self.distance_weight,
        }
    }

    pub fn gating(&self) -> GatingConfig {
        GatingConfig {
            score_threshold: self.score_threshold,
            distance_threshold: self.distance_threshold,
            temporal_threshold: self.temporal_threshold,
            overlap: self.overlap(),
        }
    }

    pub fn rig(&self) -> CameraRig {
        CameraRig {
            intrinsics: Intrinsics::from_hfov(self.hfov_deg, self.width, self.height),
            width: self.width,
            height: self.height,
        }
    }

    pub fn episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            scene: SceneSpec {
                seed: self.scene_seed,
                boxes: self.boxes,
            },
            gating: self.gating(),
            drift: DriftConfig { sigma0: self.sigma0 },
            window: self.window,
            patch: self.patch,
            seed: self.seed,
            memory: true,
        }
    }
}
