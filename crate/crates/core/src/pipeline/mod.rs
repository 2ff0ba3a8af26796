//! Dataset ingestion, per-plant orchestration, persistence and rendering.

mod config;
mod manifest;
pub mod output;
mod overlay;
mod run;
mod stages;
pub mod synth;

pub use config::{Config, EmergenceParams, EvaluationParams, SkeletonParams, CONFIG_VERSION};
pub use manifest::{load_ground_truth, load_manifest, scan_layout, Background, Manifest, ManifestEntry, Slot, DEFAULT_PATTERN};
pub use overlay::render_overlay;
pub use run::{
    detect_day, detect_emergence, load_backgrounds, run_dataset, run_plant, run_plant_with, DatasetRun, Failure,
    PlantRun, RunOptions, StageStore,
};
pub use stages::{evaluate_stage, overlay_stage, reconcile_stage};
pub use crate::record::{PlantDayRecord, PlantTimeline};
