use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::manifest::{Manifest, Slot};
use super::output;
use crate::assignment::reconcile_timeline;
use crate::dse::dse_prune_logged;
use crate::error::{Error, Result};
use crate::evaluation::{evaluate_timelines, Evaluation};
use crate::heuristics::apply_heuristics;
use crate::hull::{select_view, View};
use crate::raster::{segment_plant, BinaryMask, Raster};
use crate::record::{AuditAction, AuditEntry, PhaseLeaves, PlantDayRecord, PlantTimeline};
use crate::skeleton::{extract_graph, identify_stem_and_leaves, skeletonize_with_cutoff, SkeletonGraph};

/// A per-plant or per-image problem that did not stop the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub plant_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub view: Option<View>,
    pub stage: String,
    pub message: String,
}

/// First day whose foreground area reaches `min_area`. `areas` holds
/// `(day, area)` pairs in day order.
pub fn detect_emergence(areas: &[(u32, usize)], min_area: usize) -> Option<u32> {
    areas.iter().find(|&&(_, a)| a >= min_area).map(|&(d, _)| d)
}

/// Runs view selection, thinning, graph extraction, skeleton evolution and
/// the heuristic rules for one plant-day. Days before emergence
/// (`days_since_emergence == 0`) get an empty record.
pub fn detect_day(
    plant_id: &str,
    day: u32,
    days_since_emergence: u32,
    masks: &BTreeMap<View, BinaryMask>,
    cfg: &Config,
) -> Result<PlantDayRecord> {
    let mask_of = |v: View| masks.get(&v).cloned();
    let (m0, m90) = (mask_of(View::View0), mask_of(View::View90));
    let some = m0.as_ref().or(m90.as_ref()).ok_or_else(|| Error::invalid("no mask for this day"))?;
    let (w, h) = (some.width(), some.height());
    let blank = BinaryMask::new(w, h);
    let choice = select_view(m0.as_ref().unwrap_or(&blank), m90.as_ref().unwrap_or(&blank));
    let (view, a0, a90) = match choice {
        Ok(c) => (c.view, c.area0, c.area90),
        Err(_) => (if m0.is_some() { View::View0 } else { View::View90 }, 0.0, 0.0),
    };
    let mut rec = PlantDayRecord {
        plant_id: plant_id.to_string(),
        day,
        days_since_emergence,
        chosen_view: view,
        hull_area0: a0,
        hull_area90: a90,
        leaves: Vec::new(),
        rejected: Vec::new(),
        skeleton: SkeletonGraph::empty(w, h),
        phases: PhaseLeaves::default(),
        audit: Vec::new(),
    };
    if days_since_emergence == 0 {
        return Ok(rec);
    }
    let mask = &masks[&view];
    let skel = skeletonize_with_cutoff(mask, days_since_emergence, cfg.skeleton.last_fast_parallel_day)?;
    let leaves_of = |g: &SkeletonGraph| match identify_stem_and_leaves(g) {
        Ok(s) => s.leaves,
        Err(e) => {
            debug!("{plant_id} day {day}: {e}");
            Vec::new()
        }
    };
    let g0 = extract_graph(&skel);
    let l0 = leaves_of(&g0);
    let (g1, _) = dse_prune_logged(&g0, &cfg.dse);
    let l1 = leaves_of(&g1);
    let pruned = apply_heuristics(&g1, mask, days_since_emergence, &cfg.heuristics)?;
    let l2 = leaves_of(&pruned.graph);
    rec.audit = pruned
        .deletions
        .iter()
        .map(|d| AuditEntry {
            plant: plant_id.to_string(),
            day,
            rule: d.rule.name().to_string(),
            action: AuditAction::Delete,
            deleted_edge_tip: Some(d.deleted_edge_tip),
            deleted_edge_branch: Some(d.deleted_edge_branch),
            inserted_tip: None,
            inserted_branch: None,
        })
        .collect();
    rec.phases = PhaseLeaves {
        skeleton: PhaseLeaves::strip(&l0),
        dse: PhaseLeaves::strip(&l1),
        heuristics: PhaseLeaves::strip(&l2),
    };
    rec.leaves = l2;
    rec.skeleton = pruned.graph;
    Ok(rec)
}

/// Where stage outputs live. Without a root nothing is persisted; with
/// `resume` existing stage files are read back instead of recomputed.
#[derive(Debug, Clone, Default)]
pub struct StageStore {
    root: Option<PathBuf>,
    resume: bool,
}

impl StageStore {
    pub fn new(root: Option<PathBuf>, resume: bool) -> Self {
        Self { root, resume }
    }

    fn file(&self, stage: &str, plant: &str, name: &str) -> Option<PathBuf> {
        self.root.as_ref().map(|r| r.join(stage).join(plant).join(name))
    }

    fn mask_file(&self, plant: &str, day: u32, view: View) -> Option<PathBuf> {
        self.file("segment", plant, &format!("day_{day}_view_{view}.png"))
    }

    fn record_file(&self, plant: &str, day: u32) -> Option<PathBuf> {
        self.file("detect", plant, &format!("day_{day}.json"))
    }

    fn timeline_file(&self, plant: &str) -> Option<PathBuf> {
        self.file("reconcile", plant, "timeline.json")
    }

    fn cached(&self, p: &Option<PathBuf>) -> Option<PathBuf> {
        p.as_ref().filter(|p| self.resume && p.is_file()).cloned()
    }

    fn ensure_parent(p: &Path) -> Result<()> {
        let dir = p.parent().expect("stage files live in directories");
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
    }

    fn read_json<T: for<'de> Deserialize<'de>>(p: &Path) -> Result<T> {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn write_json<T: Serialize>(p: &Option<PathBuf>, value: &T) -> Result<()> {
        if let Some(p) = p {
            Self::ensure_parent(p)?;
            let text = serde_json::to_string(value)?;
            std::fs::write(p, text).map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }
}

/// One plant's result plus the problems met on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantRun {
    pub timeline: PlantTimeline,
    pub emergence_day: Option<u32>,
    pub failures: Vec<Failure>,
}

pub fn load_backgrounds(manifest: &Manifest) -> Result<BTreeMap<View, Raster>> {
    let mut out = BTreeMap::new();
    for v in [View::View0, View::View90] {
        out.insert(v, Raster::load(manifest.resolve(manifest.background.for_view(v)))?);
    }
    Ok(out)
}

pub fn run_plant(manifest: &Manifest, plant_id: &str, cfg: &Config) -> Result<PlantRun> {
    let bgs = load_backgrounds(manifest)?;
    run_plant_with(manifest, plant_id, cfg, &bgs, &StageStore::default())
}

/// Segments every image of the plant, finds the emergence day, detects
/// leaves per day and reconciles the timeline.
pub fn run_plant_with(
    manifest: &Manifest,
    plant_id: &str,
    cfg: &Config,
    backgrounds: &BTreeMap<View, Raster>,
    store: &StageStore,
) -> Result<PlantRun> {
    let days = manifest.plant_days(plant_id);
    if days.is_empty() {
        return Err(Error::invalid(format!("plant {plant_id} is not in the manifest")));
    }
    let jobs: Vec<(u32, View, PathBuf)> = days
        .iter()
        .flat_map(|(&d, views)| views.iter().map(move |(&v, e)| (d, v, e.image.clone())))
        .collect();
    let segmented: Vec<(u32, View, Result<BinaryMask>)> = jobs
        .par_iter()
        .map(|(d, v, image)| {
            let cache = store.mask_file(plant_id, *d, *v);
            let mask = match store.cached(&cache) {
                Some(p) => BinaryMask::load(p),
                None => Raster::load(manifest.resolve(image))
                    .and_then(|img| segment_plant(&img, &backgrounds[v], &cfg.segmentation))
                    .and_then(|m| {
                        if let Some(p) = &cache {
                            StageStore::ensure_parent(p)?;
                            m.save_png(p)?;
                        }
                        Ok(m)
                    }),
            };
            (*d, *v, mask)
        })
        .collect();

    let mut failures = Vec::new();
    let mut masks: BTreeMap<u32, BTreeMap<View, BinaryMask>> = BTreeMap::new();
    for (d, v, m) in segmented {
        match m {
            Ok(m) => {
                masks.entry(d).or_default().insert(v, m);
            }
            Err(e) => {
                warn!("{plant_id} day {d} view {v}: {e}");
                failures.push(Failure {
                    plant_id: plant_id.to_string(),
                    day: Some(d),
                    view: Some(v),
                    stage: "segment".into(),
                    message: e.to_string(),
                });
            }
        }
    }

    let areas: Vec<(u32, usize)> = masks
        .iter()
        .map(|(&d, vs)| (d, vs.values().map(BinaryMask::count).max().unwrap_or(0)))
        .collect();
    let Some(emergence) = detect_emergence(&areas, cfg.emergence.min_area) else {
        failures.push(Failure {
            plant_id: plant_id.to_string(),
            day: None,
            view: None,
            stage: "emergence".into(),
            message: format!("no day reaches {} foreground pixels; plant skipped", cfg.emergence.min_area),
        });
        return Ok(PlantRun {
            timeline: PlantTimeline {
                plant_id: plant_id.to_string(),
                records: Vec::new(),
            },
            emergence_day: None,
            failures,
        });
    };

    let detected: Vec<(u32, Result<PlantDayRecord>)> = masks
        .par_iter()
        .map(|(&d, vs)| {
            let dse = if d < emergence { 0 } else { d - emergence + 1 };
            let cache = store.record_file(plant_id, d);
            let rec = match store.cached(&cache) {
                Some(p) => StageStore::read_json(&p),
                None => detect_day(plant_id, d, dse, vs, cfg)
                    .and_then(|r| StageStore::write_json(&cache, &r).map(|_| r)),
            };
            (d, rec)
        })
        .collect();
    let mut records = Vec::new();
    for (d, r) in detected {
        match r {
            Ok(r) => records.push(r),
            Err(e) => failures.push(Failure {
                plant_id: plant_id.to_string(),
                day: Some(d),
                view: None,
                stage: "detect".into(),
                message: e.to_string(),
            }),
        }
    }
    records.sort_by_key(|r| r.day);
    let raw = PlantTimeline {
        plant_id: plant_id.to_string(),
        records,
    };
    let cache = store.timeline_file(plant_id);
    let timeline = match store.cached(&cache) {
        Some(p) => StageStore::read_json(&p)?,
        None => {
            let t = reconcile_timeline(&raw, &cfg.reconcile)?;
            StageStore::write_json(&cache, &t)?;
            t
        }
    };
    info!("{plant_id}: emergence on day {emergence}, {} days", timeline.records.len());
    Ok(PlantRun {
        timeline,
        emergence_day: Some(emergence),
        failures,
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub resume: bool,
    /// Worker threads; `None` uses rayon's default.
    pub jobs: Option<usize>,
    pub overlays: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRun {
    pub config_hash: String,
    pub timelines: Vec<PlantTimeline>,
    pub emergence: BTreeMap<String, Option<u32>>,
    pub failures: Vec<Failure>,
    pub missing: Vec<Slot>,
    pub evaluation: Option<Evaluation>,
}

impl DatasetRun {
    pub fn has_failures(&self) -> bool {
        !self.failures.is_empty()
    }
}

/// Runs every plant of the manifest, evaluates against ground truth when the
/// manifest names it, and writes all outputs under `opts.out`.
pub fn run_dataset(manifest: &Manifest, cfg: &Config, opts: &RunOptions) -> Result<DatasetRun> {
    cfg.validate()?;
    let hash = cfg.hash();
    if let Some(out) = &opts.out {
        output::prepare_out_dir(out, cfg, opts.resume)?;
    }
    let plants: Vec<String> = manifest.plants().into_iter().collect();
    let store = StageStore::new(opts.out.clone(), opts.resume);
    let work = || -> Result<Vec<(String, Result<PlantRun>)>> {
        if plants.is_empty() {
            return Ok(Vec::new());
        }
        let bgs = load_backgrounds(manifest)?;
        Ok(plants
            .par_iter()
            .map(|p| (p.clone(), run_plant_with(manifest, p, cfg, &bgs, &store)))
            .collect())
    };
    let results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(work)?,
        None => work()?,
    };

    let mut run = DatasetRun {
        config_hash: hash,
        timelines: Vec::new(),
        emergence: BTreeMap::new(),
        failures: Vec::new(),
        missing: manifest.missing.clone(),
        evaluation: None,
    };
    for (plant, r) in results {
        match r {
            Ok(pr) => {
                run.emergence.insert(plant, pr.emergence_day);
                run.failures.extend(pr.failures);
                run.timelines.push(pr.timeline);
            }
            Err(e) => run.failures.push(Failure {
                plant_id: plant,
                day: None,
                view: None,
                stage: "plant".into(),
                message: e.to_string(),
            }),
        }
    }
    if let Some(truth) = manifest.load_ground_truth()? {
        run.evaluation = Some(evaluate_timelines(
            &run.timelines,
            &truth,
            cfg.evaluation.tolerance_px,
            cfg.evaluation.truth_mode,
        ));
    }
    if let Some(out) = &opts.out {
        output::write_outputs(out, &run, cfg)?;
        if opts.overlays {
            output::write_overlays(out, manifest, &run)?;
        }
    }
    Ok(run)
}
