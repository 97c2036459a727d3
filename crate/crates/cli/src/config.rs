//! The TOML configuration file.
//!
//! Every block is optional except `[ransac]`, which must name a `seed`
//! for any command that runs the matcher. Unknown keys are rejected.
//! Relative paths are resolved against the directory holding the file.
//!
//! ```toml
//! [ransac]
//! seed = 7
//!
//! [segmentation]
//! h_s = 8.0
//! h_r = 0.04
//!
//! [paths]
//! plan = "plan.json"
//! fingerprints = "fingerprints.csv"
//! ```

use std::path::{Path, PathBuf};

use hallway_loc::corners::CornerParams;
use hallway_loc::fuse::{FeatureKind, PipelineConfig, RansacConfig};
use hallway_loc::geometry::CameraModel;
use hallway_loc::illum::IlluminantParams;
use hallway_loc::segment::SegmentParams;
use hallway_loc::wlan::WlanParams;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config value {field} {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("no RANSAC seed: set [ransac] seed in the config or pass --seed")]
    MissingSeed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSection {
    pub features: FeatureKind,
    /// meters
    pub max_landmark_range: f64,
}

impl Default for PipelineSection {
    fn default() -> Self {
        let p = PipelineConfig::new(0);
        Self {
            features: p.features,
            max_landmark_range: p.max_landmark_range,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub plan: Option<PathBuf>,
    pub fingerprints: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub camera: CameraModel,
    #[serde(default)]
    pub illumination: IlluminantParams,
    #[serde(default)]
    pub segmentation: SegmentParams,
    #[serde(default)]
    pub corners: CornerParams,
    #[serde(default)]
    pub wlan: WlanParams,
    pub ransac: Option<RansacConfig>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub paths: Paths,
}

fn check(ok: bool, field: &'static str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            reason: reason.to_string(),
        })
    }
}

impl Config {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads, validates and resolves relative paths against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text, path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.paths.plan, &mut cfg.paths.fingerprints].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.camera.validate().map_err(|e| ConfigError::Invalid {
            field: "camera",
            reason: e.to_string(),
        })?;
        let s = &self.segmentation;
        check(s.spatial_bandwidth >= 1.0, "segmentation.h_s", "must be at least 1")?;
        check(s.range_bandwidth > 0.0, "segmentation.h_r", "must be positive")?;
        check(s.max_iter >= 1, "segmentation.max_iter", "must be at least 1")?;
        check(s.eps > 0.0, "segmentation.eps", "must be positive")?;
        check(s.min_region_size >= 1, "segmentation.min_region_size", "must be at least 1")?;
        let c = &self.corners;
        check(c.k >= 1, "corners.k", "must be at least 1")?;
        check(c.threshold > 0.0, "corners.threshold", "must be positive")?;
        check(c.spur_chord >= 0.0, "corners.spur_chord", "must not be negative")?;
        check(c.merge_radius >= 0.0, "corners.merge_radius", "must not be negative")?;
        let w = &self.wlan;
        check(w.k >= 1, "wlan.k", "must be at least 1")?;
        check(w.missing_penalty >= 0.0, "wlan.missing_penalty", "must not be negative")?;
        check(w.radius_floor > 0.0, "wlan.radius_floor", "must be positive")?;
        let i = &self.illumination;
        check(
            (0.0..=1.0).contains(&i.brightness_percentile),
            "illumination.brightness_percentile",
            "must lie in [0, 1]",
        )?;
        check(i.bins >= 1, "illumination.bins", "must be at least 1")?;
        check(
            self.pipeline.max_landmark_range > 0.0,
            "pipeline.max_landmark_range",
            "must be positive",
        )?;
        if let Some(r) = &self.ransac {
            r.validate().map_err(|e| ConfigError::Invalid {
                field: "ransac",
                reason: e.to_string(),
            })?;
            check(
                r.inlier_threshold < w.radius_floor,
                "ransac.inlier_threshold",
                "must be below wlan.radius_floor",
            )?;
        }
        Ok(())
    }

    /// Pipeline settings for stages that never run the matcher; the seed
    /// is irrelevant there.
    pub fn vision(&self) -> PipelineConfig {
        let seed = self.ransac.map_or(0, |r| r.seed);
        self.pipeline(Some(seed)).expect("seed given")
    }

    /// Pipeline settings, with `seed` replacing the configured one when
    /// given.
    pub fn pipeline(&self, seed: Option<u64>) -> Result<PipelineConfig, ConfigError> {
        let ransac = match (&self.ransac, seed) {
            (Some(r), Some(s)) => RansacConfig { seed: s, ..*r },
            (Some(r), None) => *r,
            (None, Some(s)) => RansacConfig::new(s),
            (None, None) => return Err(ConfigError::MissingSeed),
        };
        Ok(PipelineConfig {
            camera: self.camera,
            illumination: self.illumination,
            segmentation: self.segmentation,
            corners: self.corners,
            wlan: self.wlan,
            ransac,
            max_landmark_range: self.pipeline.max_landmark_range,
            features: self.pipeline.features,
        })
    }
}
