//! Files written by a run.
//!
//! ```text
//! out/run.json                      config, its hash, tool version
//! out/segment/<plant>/day_<d>_view_<v>.png
//! out/detect/<plant>/day_<d>.json   per-day records before reconciliation
//! out/reconcile/<plant>/timeline.json
//! out/detections.json               final leaves per plant-day
//! out/audit.jsonl                   one line per leaf-count change
//! out/matches.jsonl                 leaf matches between successive same-view days
//! out/report.json                   failures, missing slots, emergence days
//! out/metrics.csv, out/metrics.json when ground truth is available
//! out/overlays/<plant>/day_<d>.png  on request
//! ```

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Config;
use super::manifest::Manifest;
use super::overlay::render_overlay;
use super::run::DatasetRun;
use crate::assignment::{match_leaves, LeafMatching};
use crate::error::{Error, Result};
use crate::evaluation::{Evaluation, PlantPhaseRow};
use crate::geom::Pixel;
use crate::hull::View;
use crate::raster::Raster;
use crate::record::{PlantDayRecord, PlantTimeline};
use crate::skeleton::{LeafLabel, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub tool_version: String,
    pub config_hash: String,
    pub config: Config,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Creates `out` and records the run's config. When resuming, an existing
/// run with a different config hash is refused.
pub fn prepare_out_dir(out: &Path, cfg: &Config, resume: bool) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let info_path = out.join("run.json");
    let hash = cfg.hash();
    if resume && info_path.is_file() {
        let old: RunInfo = read_json(&info_path)?;
        if old.config_hash != hash {
            return Err(Error::Config(format!(
                "refusing to resume: {} was produced with config {} but this run uses {}",
                out.display(),
                old.config_hash,
                hash
            )));
        }
    }
    let info = RunInfo {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: hash,
        config: cfg.clone(),
    };
    write_file(&info_path, serde_json::to_string_pretty(&info)?.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafOut {
    pub id: usize,
    pub branch: Option<Pixel>,
    pub tip: Option<Pixel>,
    pub length: usize,
    pub label: LeafLabel,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionDay {
    pub plant_id: String,
    pub day: u32,
    pub days_since_emergence: u32,
    pub chosen_view: View,
    pub leaf_count: usize,
    pub leaves: Vec<LeafOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detections {
    pub config_hash: String,
    pub days: Vec<DetectionDay>,
}

pub fn detections_of(timelines: &[PlantTimeline], config_hash: &str) -> Detections {
    let days = timelines
        .iter()
        .flat_map(|t| &t.records)
        .map(|r| DetectionDay {
            plant_id: r.plant_id.clone(),
            day: r.day,
            days_since_emergence: r.days_since_emergence,
            chosen_view: r.chosen_view,
            leaf_count: r.leaf_count(),
            leaves: r
                .leaves
                .iter()
                .enumerate()
                .map(|(id, l)| LeafOut {
                    id,
                    branch: l.branch,
                    tip: l.tip,
                    length: l.length,
                    label: l.label,
                    provenance: l.provenance,
                })
                .collect(),
        })
        .collect();
    Detections {
        config_hash: config_hash.to_string(),
        days,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMatch {
    pub plant_id: String,
    pub day_i: u32,
    pub day_j: u32,
    #[serde(flatten)]
    pub matching: LeafMatching,
}

/// Matches of each emerged day against the previous emerged day with the
/// same view.
pub fn successive_matches(tl: &PlantTimeline, cfg: &Config) -> Vec<DayMatch> {
    let emerged: Vec<&PlantDayRecord> = tl.records.iter().filter(|r| r.emerged()).collect();
    let mut out = Vec::new();
    for (k, r) in emerged.iter().enumerate() {
        let prev = emerged[..k].iter().rev().find(|p| p.chosen_view == r.chosen_view);
        if let Some(p) = prev {
            if let Ok(m) = match_leaves(p, r, &cfg.reconcile) {
                out.push(DayMatch {
                    plant_id: tl.plant_id.clone(),
                    day_i: p.day,
                    day_j: r.day,
                    matching: m,
                });
            }
        }
    }
    out
}

fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, &it)?;
        buf.write_all(b"\n").expect("writing to a Vec");
    }
    Ok(buf)
}

pub fn phase_csv_with_hash(rows: &[PlantPhaseRow], config_hash: &str) -> String {
    let table = crate::evaluation::phase_table_csv(rows);
    let mut lines = table.lines();
    let mut out = format!("{},config_hash\n", lines.next().unwrap_or_default());
    for l in lines {
        out.push_str(&format!("{l},{config_hash}\n"));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsFile {
    pub config_hash: String,
    #[serde(flatten)]
    pub evaluation: Evaluation,
}

pub fn write_metrics(out: &Path, eval: &Evaluation, config_hash: &str) -> Result<()> {
    write_file(&out.join("metrics.csv"), phase_csv_with_hash(&eval.per_plant, config_hash).as_bytes())?;
    let file = MetricsFile {
        config_hash: config_hash.to_string(),
        evaluation: eval.clone(),
    };
    write_file(&out.join("metrics.json"), serde_json::to_string_pretty(&file)?.as_bytes())
}

pub fn write_outputs(out: &Path, run: &DatasetRun, cfg: &Config) -> Result<()> {
    let det = detections_of(&run.timelines, &run.config_hash);
    write_file(&out.join("detections.json"), serde_json::to_string_pretty(&det)?.as_bytes())?;
    let audit = run.timelines.iter().flat_map(|t| &t.records).flat_map(|r| &r.audit);
    write_file(&out.join("audit.jsonl"), &jsonl(audit)?)?;
    let matches: Vec<DayMatch> = run.timelines.iter().flat_map(|t| successive_matches(t, cfg)).collect();
    write_file(&out.join("matches.jsonl"), &jsonl(matches)?)?;
    let report = serde_json::json!({
        "config_hash": run.config_hash,
        "failures": run.failures,
        "missing_slots": run.missing,
        "emergence": run.emergence,
    });
    write_file(&out.join("report.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    if let Some(e) = &run.evaluation {
        write_metrics(out, e, &run.config_hash)?;
    }
    Ok(())
}

pub fn write_overlays(out: &Path, manifest: &Manifest, run: &DatasetRun) -> Result<()> {
    for tl in &run.timelines {
        let days = manifest.plant_days(&tl.plant_id);
        for r in tl.records.iter().filter(|r| r.emerged()) {
            let Some(entry) = days.get(&r.day).and_then(|v| v.get(&r.chosen_view)) else { continue };
            let base = Raster::load(manifest.resolve(&entry.image))?;
            let img = render_overlay(r, &base)?;
            let path = out.join("overlays").join(&tl.plant_id).join(format!("day_{}.png", r.day));
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            img.save_png(&path)?;
        }
    }
    Ok(())
}

fn stage_files(out: &Path, stage: &str) -> Result<Vec<std::path::PathBuf>> {
    let dir = out.join(stage);
    if !dir.is_dir() {
        return Err(Error::invalid(format!("{} has no {stage} stage output", out.display())));
    }
    let mut files: Vec<_> = walkdir::WalkDir::new(&dir)
        .sort_by_file_name()
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "json"))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    Ok(files)
}

/// Per-day records of the detect stage, grouped into (unreconciled)
/// timelines.
pub fn load_detect_stage(out: &Path) -> Result<Vec<PlantTimeline>> {
    let mut by_plant: std::collections::BTreeMap<String, Vec<PlantDayRecord>> = Default::default();
    for f in stage_files(out, "detect")? {
        let r: PlantDayRecord = read_json(&f)?;
        by_plant.entry(r.plant_id.clone()).or_default().push(r);
    }
    Ok(by_plant
        .into_iter()
        .map(|(plant_id, mut records)| {
            records.sort_by_key(|r| r.day);
            PlantTimeline { plant_id, records }
        })
        .collect())
}

/// Timelines of the reconcile stage.
pub fn load_reconcile_stage(out: &Path) -> Result<Vec<PlantTimeline>> {
    stage_files(out, "reconcile")?.iter().map(|f| read_json(f)).collect()
}

pub fn read_run_info(out: &Path) -> Result<RunInfo> {
    read_json(&out.join("run.json"))
}
