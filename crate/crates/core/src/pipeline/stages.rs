//! Re-running single stages against an existing output directory.

use std::collections::BTreeMap;
use std::path::Path;

use super::config::Config;
use super::manifest::{load_ground_truth, Manifest};
use super::output;
use super::run::DatasetRun;
use crate::assignment::reconcile_timeline;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_timelines, Evaluation};
use crate::record::PlantTimeline;

fn emergence_of(tl: &PlantTimeline) -> Option<u32> {
    tl.records.iter().find(|r| r.emerged()).map(|r| r.day)
}

fn as_run(timelines: Vec<PlantTimeline>, cfg: &Config) -> DatasetRun {
    DatasetRun {
        config_hash: cfg.hash(),
        emergence: timelines.iter().map(|t| (t.plant_id.clone(), emergence_of(t))).collect(),
        timelines,
        failures: Vec::new(),
        missing: Vec::new(),
        evaluation: None,
    }
}

/// Reconciles the detect-stage records under `out` again and rewrites the
/// reconcile stage and the final outputs.
pub fn reconcile_stage(out: &Path, cfg: &Config) -> Result<DatasetRun> {
    cfg.validate()?;
    let raw = output::load_detect_stage(out)?;
    let mut timelines = Vec::with_capacity(raw.len());
    for tl in &raw {
        let t = reconcile_timeline(tl, &cfg.reconcile)?;
        let path = out.join("reconcile").join(&t.plant_id).join("timeline.json");
        let dir = path.parent().expect("has a parent");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        std::fs::write(&path, serde_json::to_string(&t)?).map_err(|e| Error::io(&path, e))?;
        timelines.push(t);
    }
    output::prepare_out_dir(out, cfg, false)?;
    let run = as_run(timelines, cfg);
    output::write_outputs(out, &run, cfg)?;
    Ok(run)
}

/// Scores the reconciled timelines under `out` against a ground-truth file
/// and writes the metrics files.
pub fn evaluate_stage(out: &Path, truth: &Path, cfg: &Config) -> Result<Evaluation> {
    let timelines = output::load_reconcile_stage(out)?;
    let truth: BTreeMap<_, _> = load_ground_truth(truth)?;
    let eval = evaluate_timelines(&timelines, &truth, cfg.evaluation.tolerance_px, cfg.evaluation.truth_mode);
    output::write_metrics(out, &eval, &cfg.hash())?;
    Ok(eval)
}

/// Renders overlays for the reconciled timelines under `out`.
pub fn overlay_stage(out: &Path, manifest: &Manifest, cfg: &Config) -> Result<usize> {
    let run = as_run(output::load_reconcile_stage(out)?, cfg);
    output::write_overlays(out, manifest, &run)?;
    Ok(run.timelines.iter().flat_map(|t| &t.records).filter(|r| r.emerged()).count())
}
