//! Detection metrics against ground truth.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Pixel;
use crate::hull::View;
use crate::record::PlantTimeline;
use crate::skeleton::LeafCandidate;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafAnnotation {
    pub tip: Pixel,
    #[serde(default)]
    pub branch: Option<Pixel>,
    /// False for leaves hidden in this view; they do not count towards
    /// the view's total.
    #[serde(default = "yes")]
    pub visible: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewTruth {
    /// Explicit count; defaults to the number of visible annotations.
    #[serde(default)]
    pub count: Option<u32>,
    #[serde(default)]
    pub leaves: Vec<LeafAnnotation>,
}

impl ViewTruth {
    pub fn leaf_count(&self) -> u32 {
        self.count
            .unwrap_or_else(|| self.leaves.iter().filter(|l| l.visible).count() as u32)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub plant_id: String,
    pub day: u32,
    #[serde(default)]
    pub view0: Option<ViewTruth>,
    #[serde(default)]
    pub view90: Option<ViewTruth>,
}

/// Which count a day is scored against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthMode {
    /// The larger of the two views' counts.
    #[default]
    MaxAcrossViews,
    /// The count in the view the pipeline selected.
    SelectedView,
}

impl GroundTruth {
    pub fn view(&self, v: View) -> Option<&ViewTruth> {
        match v {
            View::View0 => self.view0.as_ref(),
            View::View90 => self.view90.as_ref(),
        }
    }

    pub fn ground_truth_count(&self) -> u32 {
        [&self.view0, &self.view90]
            .into_iter()
            .flatten()
            .map(ViewTruth::leaf_count)
            .max()
            .unwrap_or(0)
    }

    pub fn count_for(&self, mode: TruthMode, selected: View) -> u32 {
        match mode {
            TruthMode::MaxAcrossViews => self.ground_truth_count(),
            TruthMode::SelectedView => self.view(selected).map_or(0, ViewTruth::leaf_count),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl std::ops::AddAssign for Confusion {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

/// Scores one image's detections.
///
/// With positional annotations in the selected view, detections and
/// annotated tips are paired greedily nearest-first within `tolerance`,
/// each annotation used once; detections without a position then fill any
/// remaining truth. Without annotations the day is scored on counts alone.
/// Either way `tp + fn` equals the truth count.
pub fn day_confusion(
    leaves: &[LeafCandidate],
    selected: View,
    truth: &GroundTruth,
    tolerance: f64,
    mode: TruthMode,
) -> Confusion {
    let truth_count = u64::from(truth.count_for(mode, selected));
    let detected = leaves.len() as u64;
    let annotations = truth.view(selected).map(|v| v.leaves.as_slice()).unwrap_or(&[]);
    if annotations.is_empty() {
        let tp = detected.min(truth_count);
        return Confusion {
            tp,
            fp: detected - tp,
            fn_: truth_count - tp,
        };
    }
    let mut pairs = Vec::new();
    for (i, l) in leaves.iter().enumerate() {
        let Some(t) = l.tip else { continue };
        for (j, a) in annotations.iter().enumerate() {
            let d = t.dist(a.tip);
            if d <= tolerance {
                pairs.push((d, i, j));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used_det = BTreeSet::new();
    let mut used_ann = BTreeSet::new();
    for (_, i, j) in pairs {
        if !used_det.contains(&i) && !used_ann.contains(&j) {
            used_det.insert(i);
            used_ann.insert(j);
        }
    }
    let mut tp = (used_det.len() as u64).min(truth_count);
    let positionless = leaves.iter().filter(|l| l.tip.is_none()).count() as u64;
    tp += positionless.min(truth_count - tp);
    Confusion {
        tp,
        fp: detected - tp,
        fn_: truth_count - tp,
    }
}

/// One scored image: the detections and the view they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct DayDetections {
    pub view: View,
    pub leaves: Vec<LeafCandidate>,
}

/// Sums [`day_confusion`] over plant-days. Both maps must cover the same
/// `(plant, day)` keys.
pub fn confusion_counts(
    detections: &BTreeMap<(String, u32), DayDetections>,
    truth: &BTreeMap<(String, u32), GroundTruth>,
    tolerance: f64,
    mode: TruthMode,
) -> Result<Confusion> {
    if detections.len() != truth.len() || detections.keys().any(|k| !truth.contains_key(k)) {
        return Err(Error::invalid("detections and ground truth cover different plant-days"));
    }
    let mut total = Confusion::default();
    for (k, d) in detections {
        total += day_confusion(&d.leaves, d.view, &truth[k], tolerance, mode);
    }
    Ok(total)
}

/// `(precision, recall)`; `None` where the denominator is zero.
pub fn precision_recall(tp: u64, fp: u64, fn_: u64) -> (Option<f64>, Option<f64>) {
    let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
    (ratio(tp, tp + fp), ratio(tp, tp + fn_))
}

/// Mean and population standard deviation of per-image absolute count
/// errors. Empty input gives `(0, 0)`.
pub fn absolute_loss_stats(predicted: &[f64], truth: &[f64]) -> Result<(f64, f64)> {
    if predicted.len() != truth.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} ground-truth counts",
            predicted.len(),
            truth.len()
        )));
    }
    if predicted.is_empty() {
        return Ok((0.0, 0.0));
    }
    let n = predicted.len() as f64;
    let losses: Vec<f64> = predicted.iter().zip(truth).map(|(p, t)| (p - t).abs()).collect();
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub positives: u64,
    pub recall: Option<f64>,
    pub precision: Option<f64>,
    pub mean_abs_loss: f64,
    pub abs_loss_std: f64,
    pub images: usize,
    pub truth_mode: TruthMode,
    pub tolerance_px: f64,
    /// Always "population".
    pub std_convention: String,
}

/// True/false leaf totals per pipeline phase for one plant.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantPhaseRow {
    pub plant_id: String,
    pub skeleton_true: u64,
    pub skeleton_false: u64,
    pub dse_true: u64,
    pub dse_false: u64,
    pub heuristics_true: u64,
    pub heuristics_false: u64,
    pub final_true: u64,
    pub final_false: u64,
    pub ground_truth: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricsReport,
    pub per_plant: Vec<PlantPhaseRow>,
}

/// Scores every emerged plant-day that has ground truth.
pub fn evaluate_timelines(
    timelines: &[PlantTimeline],
    truth: &BTreeMap<(String, u32), GroundTruth>,
    tolerance: f64,
    mode: TruthMode,
) -> Evaluation {
    let mut total = Confusion::default();
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    let mut per_plant = Vec::new();
    for tl in timelines {
        let mut row = PlantPhaseRow {
            plant_id: tl.plant_id.clone(),
            ..Default::default()
        };
        for rec in &tl.records {
            let Some(gt) = truth.get(&(rec.plant_id.clone(), rec.day)) else { continue };
            let score = |leaves: &[LeafCandidate]| day_confusion(leaves, rec.chosen_view, gt, tolerance, mode);
            let phases = [
                score(&rec.phases.skeleton),
                score(&rec.phases.dse),
                score(&rec.phases.heuristics),
                score(&rec.leaves),
            ];
            row.skeleton_true += phases[0].tp;
            row.skeleton_false += phases[0].fp;
            row.dse_true += phases[1].tp;
            row.dse_false += phases[1].fp;
            row.heuristics_true += phases[2].tp;
            row.heuristics_false += phases[2].fp;
            row.final_true += phases[3].tp;
            row.final_false += phases[3].fp;
            row.ground_truth += u64::from(gt.count_for(mode, rec.chosen_view));
            total += phases[3];
            predicted.push(rec.leaf_count() as f64);
            actual.push(f64::from(gt.count_for(mode, rec.chosen_view)));
        }
        per_plant.push(row);
    }
    let (precision, recall) = precision_recall(total.tp, total.fp, total.fn_);
    let (mean, std) = absolute_loss_stats(&predicted, &actual).expect("equal lengths");
    Evaluation {
        report: MetricsReport {
            tp: total.tp,
            fp: total.fp,
            fn_: total.fn_,
            positives: total.tp + total.fn_,
            recall,
            precision,
            mean_abs_loss: mean,
            abs_loss_std: std,
            images: predicted.len(),
            truth_mode: mode,
            tolerance_px: tolerance,
            std_convention: "population".into(),
        },
        per_plant,
    }
}

/// Per-plant phase table as CSV.
pub fn phase_table_csv(rows: &[PlantPhaseRow]) -> String {
    let mut out = String::from(
        "plant_id,skeleton_true,skeleton_false,dse_true,dse_false,heuristics_true,heuristics_false,final_true,final_false,ground_truth\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.plant_id,
            r.skeleton_true,
            r.skeleton_false,
            r.dse_true,
            r.dse_false,
            r.heuristics_true,
            r.heuristics_false,
            r.final_true,
            r.final_false,
            r.ground_truth
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_two_ratios() {
        // Three decimals by truncation: 1674/1690 = 0.99053.
        let trunc3 = |v: f64| (v * 1000.0).floor() / 1000.0;
        let (p, r) = precision_recall(1674, 16, 169);
        assert_eq!(trunc3(p.unwrap()), 0.990);
        assert_eq!(trunc3(r.unwrap()), 0.908);
        assert_eq!(precision_recall(0, 0, 0), (None, None));
        assert_eq!(precision_recall(10, 0, 0), (Some(1.0), Some(1.0)));
    }

    #[test]
    fn loss_examples() {
        assert_eq!(absolute_loss_stats(&[3.0, 5.0], &[4.0, 5.0]).unwrap(), (0.5, 0.5));
        assert_eq!(absolute_loss_stats(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, 0.0));
        assert!(absolute_loss_stats(&[1.0], &[]).is_err());
    }

    #[test]
    fn count_based_day() {
        let gt = GroundTruth {
            plant_id: "p".into(),
            day: 1,
            view0: Some(ViewTruth {
                count: Some(4),
                leaves: vec![],
            }),
            view90: Some(ViewTruth {
                count: Some(3),
                leaves: vec![],
            }),
        };
        let leaves = vec![LeafCandidate::count_only(); 5];
        let c = day_confusion(&leaves, View::View90, &gt, 20.0, TruthMode::MaxAcrossViews);
        assert_eq!(c, Confusion { tp: 4, fp: 1, fn_: 0 });
    }
}
