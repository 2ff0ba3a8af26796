//! Stylised maize fixtures with known leaf topology.
//!
//! A plant is a vertical stem with tapered leaves alternating left and
//! right, rising outwards. Leaf `k` appears on the first day `d` (since
//! emergence) with `1 + floor((d - 1) / 2.5) >= k`, so counts grow at one
//! leaf per 2.5 days up to ten leaves. One view shows the plant broadside;
//! the other is foreshortened sideways. A tub stripe that differs from the
//! background but is not green sits under the plant.
//!
//! Optional anomalies: one day with a leaf hidden in the broadside view and
//! one day with a short spur on the stem. Both are placed on days where the
//! corrupted count leaves the expected range and the neighbouring days
//! outvote it, so count reconciliation can repair them.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::Config;
use super::manifest::{Background, Manifest, ManifestEntry, DEFAULT_PATTERN};
use crate::assignment::{expected_leaf_range, ReconcileParams};
use crate::error::{Error, Result};
use crate::evaluation::{GroundTruth, LeafAnnotation, ViewTruth};
use crate::geom::Pixel;
use crate::hull::View;
use crate::raster::Raster;

pub const BACKGROUND: [f32; 3] = [0.1, 0.1, 0.1];
pub const PLANT: [f32; 3] = [0.25, 0.75, 0.2];
pub const TUB: [f32; 3] = [0.7, 0.55, 0.35];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub plants: usize,
    /// Calendar days per plant.
    pub days: u32,
    pub width: usize,
    pub height: usize,
    pub seed: u64,
    pub inject_occlusion: bool,
    pub inject_spur: bool,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            plants: 5,
            days: 27,
            width: 300,
            height: 400,
            seed: 7,
            inject_occlusion: true,
            inject_spur: true,
        }
    }
}

/// Number of leaves `dse` days after emergence (0 before emergence).
pub fn true_leaf_count(dse: u32) -> u32 {
    if dse == 0 {
        0
    } else {
        (1 + 2 * (dse - 1) / 5).min(10)
    }
}

fn birth_day(k: u32) -> u32 {
    (1..).find(|&d| true_leaf_count(d) >= k).unwrap()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Occlusion {
    pub dse: u32,
    /// 1-based leaf number, counted from the bottom.
    pub leaf: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthPlant {
    pub plant_id: String,
    /// Calendar day on which the plant first shows.
    pub emergence_day: u32,
    pub last_day: u32,
    pub wide_view: View,
    /// Column of the stem.
    pub stem_col: f64,
    /// +1: the first leaf points right.
    pub first_side: i32,
    /// Leaf elevation above the horizontal, degrees.
    pub elevations: Vec<f64>,
    pub max_lengths: Vec<f64>,
    /// Sideways scale of the narrow view.
    pub narrow_scale: f64,
    pub scale: f64,
    pub height: usize,
    pub width: usize,
    pub occlusion: Option<Occlusion>,
    /// Day (since emergence) carrying the spur.
    pub spur_dse: Option<u32>,
}

impl SynthPlant {
    pub fn dse(&self, day: u32) -> u32 {
        if day < self.emergence_day {
            0
        } else {
            day - self.emergence_day + 1
        }
    }

    pub fn max_dse(&self) -> u32 {
        self.dse(self.last_day)
    }

    pub fn calendar_day(&self, dse: u32) -> u32 {
        self.emergence_day + dse - 1
    }

    fn base_row(&self) -> f64 {
        self.height as f64 - 28.0 * self.scale
    }

    fn attach_row(&self, k: u32) -> f64 {
        self.base_row() - (20.0 + 24.0 * f64::from(k - 1)) * self.scale
    }

    fn side(&self, k: u32) -> f64 {
        f64::from(if k % 2 == 1 { self.first_side } else { -self.first_side })
    }

    /// Branch point and tip of leaf `k` in the broadside view.
    fn leaf_axis(&self, k: u32, dse: u32) -> ((f64, f64), (f64, f64)) {
        let i = (k - 1) as usize;
        let age = f64::from(dse - birth_day(k));
        let len = (20.0 + 5.0 * age).min(self.max_lengths[i]) * self.scale;
        let a = self.elevations[i].to_radians();
        let base = (self.attach_row(k), self.stem_col);
        let tip = (base.0 - len * a.sin(), base.1 + self.side(k) * len * a.cos());
        (base, tip)
    }
}

struct Shape {
    from: (f64, f64),
    to: (f64, f64),
    r0: f64,
    r1: f64,
}

impl Shape {
    fn contains(&self, p: (f64, f64)) -> bool {
        let (dx, dy) = (self.to.0 - self.from.0, self.to.1 - self.from.1);
        let l2 = dx * dx + dy * dy;
        let t = if l2 == 0.0 {
            0.0
        } else {
            (((p.0 - self.from.0) * dx + (p.1 - self.from.1) * dy) / l2).clamp(0.0, 1.0)
        };
        let (cx, cy) = (self.from.0 + t * dx, self.from.1 + t * dy);
        let r = self.r0 + (self.r1 - self.r0) * t;
        (p.0 - cx).powi(2) + (p.1 - cy).powi(2) <= r * r
    }

    fn bounds(&self) -> (f64, f64, f64, f64) {
        let r = self.r0.max(self.r1) + 1.0;
        (
            self.from.0.min(self.to.0) - r,
            self.from.0.max(self.to.0) + r,
            self.from.1.min(self.to.1) - r,
            self.from.1.max(self.to.1) + r,
        )
    }
}

fn to_pixel(p: (f64, f64)) -> Pixel {
    Pixel::new(p.0.round() as i32, p.1.round() as i32)
}

/// The background frame shared by all plants.
pub fn render_background(width: usize, height: usize) -> Raster {
    Raster::from_fn(width, height, |_, _| BACKGROUND).expect("valid size")
}

/// Renders one plant on one calendar day in one view, with its leaf
/// annotations for that view.
pub fn render_plant_day(plant: &SynthPlant, day: u32, view: View) -> (Raster, ViewTruth) {
    let (w, h) = (plant.width, plant.height);
    let dse = plant.dse(day);
    let squeeze = if view == plant.wide_view { 1.0 } else { plant.narrow_scale };
    let proj = |p: (f64, f64)| (p.0, plant.stem_col + (p.1 - plant.stem_col) * squeeze);
    let s = plant.scale;

    let mut shapes = Vec::new();
    let mut leaves = Vec::new();
    let n = true_leaf_count(dse);
    if dse >= 1 {
        let top = plant.attach_row(n) - 14.0 * s;
        shapes.push(Shape {
            from: (plant.base_row(), plant.stem_col),
            to: (top, plant.stem_col),
            r0: 2.5 * s,
            r1: 2.5 * s,
        });
        for k in 1..=n {
            let (b, t) = plant.leaf_axis(k, dse);
            let hidden = view == plant.wide_view
                && plant.occlusion.as_ref().is_some_and(|o| o.dse == dse && o.leaf == k);
            if !hidden {
                shapes.push(Shape {
                    from: proj(b),
                    to: proj(t),
                    r0: 3.0 * s,
                    r1: 1.5 * s,
                });
            }
            leaves.push(LeafAnnotation {
                tip: to_pixel(proj(t)),
                branch: Some(to_pixel(proj(b))),
                visible: !hidden,
            });
        }
        if plant.spur_dse == Some(dse) {
            // Spurs are only placed once six leaves exist; this one sits between
            // leaves 5 and 6.
            let row = (plant.attach_row(5) + plant.attach_row(6)) / 2.0;
            let side = plant.side(6);
            shapes.push(Shape {
                from: (row, plant.stem_col),
                to: proj((row, plant.stem_col + side * 14.5 * s)),
                r0: 1.5 * s,
                r1: 1.5 * s,
            });
        }
    }

    let tub_top = h as f64 - 24.0 * s;
    let mut img = Raster::from_fn(w, h, |x, _| if x as f64 >= tub_top { TUB } else { BACKGROUND }).expect("valid size");
    for sh in &shapes {
        let (x0, x1, y0, y1) = sh.bounds();
        let xs = (x0.floor().max(0.0) as usize)..=(x1.ceil().min(h as f64 - 1.0) as usize);
        for x in xs {
            for y in (y0.floor().max(0.0) as usize)..=(y1.ceil().min(w as f64 - 1.0) as usize) {
                if sh.contains((x as f64, y as f64)) {
                    for (c, v) in PLANT.iter().enumerate() {
                        img.set(x, y, c, *v);
                    }
                }
            }
        }
    }
    (img, ViewTruth { count: None, leaves })
}

/// Whether an anomaly on day `d` shifting the count by `delta` is outvoted
/// by the clean neighbouring days.
fn repairable(d: u32, delta: i32, max_dse: u32, p: &ReconcileParams) -> bool {
    let count = true_leaf_count(d) as i32 + delta;
    let (lo, hi) = expected_leaf_range(d, p).unwrap();
    if (lo as i32..=hi as i32).contains(&count) {
        return false;
    }
    let neighbours: Vec<i32> = (d.saturating_sub(p.window).max(1)..=(d + p.window).min(max_dse))
        .filter(|&e| e != d)
        .map(|e| true_leaf_count(e) as i32)
        .collect();
    let quorum = (p.consensus_quorum as usize * neighbours.len()).div_ceil(2 * p.window as usize);
    let agree = neighbours.iter().filter(|&&c| if delta < 0 { c > count } else { c < count }).count();
    !neighbours.is_empty() && agree >= quorum
}

pub fn make_plant(index: usize, params: &SynthParams) -> SynthPlant {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_mul(1_000_003).wrapping_add(index as u64));
    let scale = params.height as f64 / 400.0;
    let emergence_day = rng.gen_range(2..=3);
    let mut plant = SynthPlant {
        plant_id: format!("plant_{:03}", index + 1),
        emergence_day,
        last_day: params.days,
        wide_view: if rng.gen_bool(0.5) { View::View0 } else { View::View90 },
        stem_col: params.width as f64 / 2.0 + rng.gen_range(-15.0..15.0) * scale,
        first_side: if rng.gen_bool(0.5) { 1 } else { -1 },
        elevations: (0..10).map(|_| rng.gen_range(25.0..38.0)).collect(),
        max_lengths: (0..10).map(|_| rng.gen_range(70.0..95.0)).collect(),
        narrow_scale: rng.gen_range(0.35..0.5),
        scale,
        height: params.height,
        width: params.width,
        occlusion: None,
        spur_dse: None,
    };
    let p = ReconcileParams::default();
    let max = plant.max_dse();
    if params.inject_spur {
        let spurs: Vec<u32> = (1..=max).filter(|&d| repairable(d, 1, max, &p) && true_leaf_count(d) >= 6).collect();
        plant.spur_dse = spurs.first().copied();
    }
    if params.inject_occlusion {
        let far_from_spur = |d: u32| plant.spur_dse.map_or(true, |s| s.abs_diff(d) > p.window);
        let options: Vec<u32> = (1..=max)
            .filter(|&d| true_leaf_count(d) >= 3 && repairable(d, -1, max, &p) && far_from_spur(d))
            .collect();
        if !options.is_empty() {
            let dse = options[rng.gen_range(0..options.len())];
            // A middle leaf: old enough to be on the neighbouring days too.
            plant.occlusion = Some(Occlusion {
                dse,
                leaf: true_leaf_count(dse) - 1,
            });
        }
    }
    plant
}

/// What [`generate_dataset`] wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthDataset {
    pub dir: PathBuf,
    pub manifest: PathBuf,
    pub ground_truth: PathBuf,
    pub config: PathBuf,
    pub plants: Vec<SynthPlant>,
}

impl SynthDataset {
    /// True count per `(plant, calendar day)`.
    pub fn true_counts(&self) -> Vec<(String, u32, u32)> {
        self.plants
            .iter()
            .flat_map(|p| (1..=p.last_day).map(move |d| (p.plant_id.clone(), d, true_leaf_count(p.dse(d)))))
            .collect()
    }
}

/// Config matching the fixture scale.
pub fn synth_config(params: &SynthParams) -> Config {
    let mut c = Config::scaled_for_height(params.height);
    c.emergence.min_area = 100;
    c
}

/// Writes images, background, manifest, ground truth, a matching config and
/// `synth.json` (the generator truth) under `dir`.
pub fn generate_dataset(dir: &Path, params: &SynthParams) -> Result<SynthDataset> {
    if params.width < 100 || params.height < 200 {
        return Err(Error::invalid("synthetic frames must be at least 100 x 200"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    render_background(params.width, params.height).save_png(dir.join("background.png"))?;
    let plants: Vec<SynthPlant> = (0..params.plants).map(|i| make_plant(i, params)).collect();

    let mut entries = Vec::new();
    let mut truth = Vec::new();
    for plant in &plants {
        for day in 1..=params.days {
            let mut gt = GroundTruth {
                plant_id: plant.plant_id.clone(),
                day,
                view0: None,
                view90: None,
            };
            for view in [View::View0, View::View90] {
                let rel = PathBuf::from(
                    DEFAULT_PATTERN
                        .replace("{plant}", &plant.plant_id)
                        .replace("{day}", &day.to_string())
                        .replace("{view}", &view.to_string()),
                );
                let full = dir.join(&rel);
                let parent = full.parent().expect("pattern has directories");
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                let (img, vt) = render_plant_day(plant, day, view);
                img.save_png(&full)?;
                match view {
                    View::View0 => gt.view0 = Some(vt),
                    View::View90 => gt.view90 = Some(vt),
                }
                entries.push(ManifestEntry {
                    plant_id: plant.plant_id.clone(),
                    day,
                    view,
                    image: rel,
                });
            }
            truth.push(gt);
        }
    }

    let write = |name: &str, text: String| -> Result<PathBuf> {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    };
    let ground_truth = write("ground_truth.json", serde_json::to_string_pretty(&truth)?)?;
    let mut manifest = Manifest::new(dir.to_path_buf(), Background::Shared("background.png".into()), entries)?;
    manifest.root = PathBuf::from(".");
    manifest.ground_truth = Some("ground_truth.json".into());
    let manifest_path = write("manifest.json", serde_json::to_string_pretty(&manifest)?)?;
    let config = write("config.toml", synth_config(params).to_toml())?;
    let ds = SynthDataset {
        dir: dir.to_path_buf(),
        manifest: manifest_path,
        ground_truth,
        config,
        plants,
    };
    write("synth.json", serde_json::to_string_pretty(&ds)?)?;
    Ok(ds)
}
