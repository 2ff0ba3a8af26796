use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dse::DseParams;
use crate::error::{Error, Result};
use crate::evaluation::TruthMode;
use crate::heuristics::HeuristicParams;
use crate::assignment::ReconcileParams;
use crate::raster::SegmentationParams;
use crate::skeleton::LAST_FAST_PARALLEL_DAY;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SkeletonParams {
    /// Last day since emergence thinned with the fast parallel algorithm.
    pub last_fast_parallel_day: u32,
}

impl Default for SkeletonParams {
    fn default() -> Self {
        Self {
            last_fast_parallel_day: LAST_FAST_PARALLEL_DAY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmergenceParams {
    /// Foreground pixels needed before a plant counts as emerged.
    pub min_area: usize,
}

impl Default for EmergenceParams {
    fn default() -> Self {
        Self { min_area: 500 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationParams {
    /// Tip distance within which a detection matches an annotation.
    pub tolerance_px: f64,
    pub truth_mode: TruthMode,
}

impl Default for EvaluationParams {
    fn default() -> Self {
        Self {
            tolerance_px: 20.0,
            truth_mode: TruthMode::MaxAcrossViews,
        }
    }
}

/// Every tunable threshold of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub version: u32,
    pub segmentation: SegmentationParams,
    pub emergence: EmergenceParams,
    pub skeleton: SkeletonParams,
    pub dse: DseParams,
    pub heuristics: HeuristicParams,
    pub reconcile: ReconcileParams,
    pub evaluation: EvaluationParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            segmentation: SegmentationParams::default(),
            emergence: EmergenceParams::default(),
            skeleton: SkeletonParams::default(),
            dse: DseParams::default(),
            heuristics: HeuristicParams::default(),
            reconcile: ReconcileParams::default(),
            evaluation: EvaluationParams::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config is always representable in TOML")
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        self.segmentation.validate()?;
        self.dse.validate()?;
        self.heuristics.validate()?;
        self.reconcile.validate()?;
        if self.skeleton.last_fast_parallel_day == 0 {
            return Err(Error::Config("skeleton.last_fast_parallel_day must be positive".into()));
        }
        if !(self.evaluation.tolerance_px >= 0.0) {
            return Err(Error::Config("evaluation.tolerance_px must be non-negative".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    /// Defaults with the pixel-valued thresholds scaled for images of
    /// `height` rows (the defaults assume 2454-row images).
    pub fn scaled_for_height(height: usize) -> Self {
        let mut c = Config::default();
        let s = height as f64 / 2454.0;
        c.heuristics.upper_region_cutoff = ((1700.0 * s).round() as u32).max(1);
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        let c = Config::default();
        let back = Config::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
        let mut d = c.clone();
        d.dse.weight_threshold = 0.006;
        assert_ne!(d.hash(), c.hash());
    }

    #[test]
    fn partial_and_bad_files() {
        let c = Config::from_toml("version = 1\n[dse]\nweight_threshold = 0.01\n").unwrap();
        assert_eq!(c.dse.weight_threshold, 0.01);
        assert_eq!(c.heuristics.upper_region_cutoff, 1700);
        assert!(Config::from_toml("version = 2").is_err());
        assert!(Config::from_toml("[dse]\nbogus = 1").is_err());
        assert!(Config::from_toml("[heuristics]\nleaf_stem_angle_threshold = 95.0").is_err());
    }
}
