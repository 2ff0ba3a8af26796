mod common;

use std::collections::BTreeMap;

use common::*;
use maizeleaf::evaluation::*;
use maizeleaf::hull::View;
use maizeleaf::skeleton::LeafCandidate;

fn trunc3(v: f64) -> f64 {
    (v * 1000.0).floor() / 1000.0
}

fn annotated(tips: &[(i32, i32)]) -> ViewTruth {
    ViewTruth {
        count: None,
        leaves: tips
            .iter()
            .map(|&t| LeafAnnotation {
                tip: t.into(),
                branch: None,
                visible: true,
            })
            .collect(),
    }
}

fn truth(plant: &str, day: u32, v0: ViewTruth, v90: Option<ViewTruth>) -> GroundTruth {
    GroundTruth {
        plant_id: plant.into(),
        day,
        view0: Some(v0),
        view90: v90,
    }
}

#[test]
fn reported_ratios() {
    let (p, r) = precision_recall(1674, 16, 169);
    assert_eq!((trunc3(p.unwrap()), trunc3(r.unwrap())), (0.990, 0.908));
    // The same table row truncates the plain-skeleton recall as well.
    let (_, r) = precision_recall(1651, 0, 192);
    assert_eq!(trunc3(r.unwrap()), 0.895);
    assert_eq!(precision_recall(0, 0, 0), (None, None));
    assert_eq!(precision_recall(10, 0, 0), (Some(1.0), Some(1.0)));
    assert_eq!(precision_recall(0, 3, 0), (Some(0.0), None));
}

#[test]
fn loss_statistics() {
    assert_eq!(absolute_loss_stats(&[3.0, 5.0], &[4.0, 5.0]).unwrap(), (0.5, 0.5));
    assert_eq!(absolute_loss_stats(&[], &[]).unwrap(), (0.0, 0.0));
    // Population std: losses 0, 2 → mean 1, std 1.
    assert_eq!(absolute_loss_stats(&[4.0, 6.0], &[4.0, 4.0]).unwrap(), (1.0, 1.0));
    assert!(absolute_loss_stats(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn count_only_scoring() {
    let gt = truth(
        "p",
        1,
        ViewTruth { count: Some(4), leaves: vec![] },
        Some(ViewTruth { count: Some(2), leaves: vec![] }),
    );
    let five = vec![LeafCandidate::count_only(); 5];
    let c = day_confusion(&five, View::View0, &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!(c, Confusion { tp: 4, fp: 1, fn_: 0 });
    let c = day_confusion(&five, View::View90, &gt, 10.0, TruthMode::SelectedView);
    assert_eq!(c, Confusion { tp: 2, fp: 3, fn_: 0 });
    let c = day_confusion(&five[..1], View::View0, &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!(c, Confusion { tp: 1, fp: 0, fn_: 3 });
}

#[test]
fn positional_matching_respects_tolerance() {
    let gt = truth("p", 1, annotated(&[(100, 100), (200, 200), (300, 300)]), None);
    let dets = vec![
        leaf((150, 150), (103, 104)), // 5 px away
        leaf((250, 250), (200, 215)), // 15 px away
        leaf((350, 350), (320, 300)), // 20 px away
    ];
    let c = day_confusion(&dets, View::View0, &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!(c, Confusion { tp: 1, fp: 2, fn_: 2 });
    let c = day_confusion(&dets, View::View0, &gt, 20.0, TruthMode::MaxAcrossViews);
    assert_eq!(c, Confusion { tp: 3, fp: 0, fn_: 0 });
}

#[test]
fn each_annotation_matched_once_nearest_first() {
    let gt = truth("p", 1, annotated(&[(100, 100), (100, 112)]), None);
    // Both detections are near the first tip; the nearer one takes it and
    // the other still reaches the second tip.
    let dets = vec![leaf((150, 150), (100, 104)), leaf((150, 150), (100, 101))];
    let c = day_confusion(&dets, View::View0, &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!(c.tp, 2);
    // Two detections crowding a single tip: only one is true.
    let gt = truth("p", 1, annotated(&[(100, 100)]), None);
    let c = day_confusion(&dets, View::View0, &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!(c, Confusion { tp: 1, fp: 1, fn_: 0 });
}

#[test]
fn hidden_annotations_and_positionless_leaves() {
    let mut v0 = annotated(&[(100, 100), (200, 200), (300, 300)]);
    v0.leaves[2].visible = false;
    assert_eq!(v0.leaf_count(), 2);
    let gt = truth("p", 1, v0, Some(ViewTruth { count: Some(3), leaves: vec![] }));
    let dets = vec![leaf((150, 150), (100, 100)), LeafCandidate::count_only()];
    // Max across views is 3: one positional hit plus one count-only credit.
    let c = day_confusion(&dets, View::View0, &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!(c, Confusion { tp: 2, fp: 0, fn_: 1 });
}

#[test]
fn tp_plus_fn_equals_truth() {
    let gt = truth("p", 1, annotated(&[(10, 10), (20, 20), (30, 30), (40, 40)]), None);
    for n in 0..8 {
        let dets: Vec<_> = (0..n).map(|i| leaf((0, 0), (10 + 7 * i, 10 + 7 * i))).collect();
        for tol in [0.0, 3.0, 10.0, 100.0] {
            let c = day_confusion(&dets, View::View0, &gt, tol, TruthMode::MaxAcrossViews);
            assert_eq!(c.tp + c.fn_, 4);
            assert_eq!(c.tp + c.fp, n as u64);
        }
    }
}

#[test]
fn confusion_requires_matching_keys() {
    let key = ("p".to_string(), 1);
    let mut dets = BTreeMap::new();
    dets.insert(key.clone(), DayDetections { view: View::View0, leaves: vec![LeafCandidate::count_only(); 3] });
    let mut gt = BTreeMap::new();
    gt.insert(key.clone(), truth("p", 1, ViewTruth { count: Some(2), leaves: vec![] }, None));
    let c = confusion_counts(&dets, &gt, 10.0, TruthMode::MaxAcrossViews).unwrap();
    assert_eq!(c, Confusion { tp: 2, fp: 1, fn_: 0 });
    gt.insert(("p".to_string(), 2), truth("p", 2, ViewTruth::default(), None));
    assert!(confusion_counts(&dets, &gt, 10.0, TruthMode::MaxAcrossViews).is_err());
}

#[test]
fn timeline_evaluation_and_phase_table() {
    let tl = timeline(&[5, 4, 5], 3);
    let mut gt = BTreeMap::new();
    for day in 1..=3 {
        let tips: Vec<(i32, i32)> = five_leaves().iter().map(|l| l.tip.map(|t| (t.x, t.y)).unwrap()).collect();
        gt.insert(("p".to_string(), day), truth("p", day, annotated(&tips), None));
    }
    let ev = evaluate_timelines(&[tl.clone()], &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!((ev.report.tp, ev.report.fp, ev.report.fn_), (14, 0, 1));
    assert_eq!(ev.report.positives, 15);
    assert_eq!(ev.report.images, 3);
    assert!((ev.report.mean_abs_loss - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(ev.report.precision, Some(1.0));
    let row = &ev.per_plant[0];
    assert_eq!((row.final_true, row.final_false, row.ground_truth), (14, 0, 15));

    let csv = phase_table_csv(&ev.per_plant);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("plant_id,skeleton_true"));
    assert_eq!(lines[1].split(',').count(), lines[0].split(',').count());
    assert!(lines[1].ends_with(",14,0,15"));

    // Days without truth are skipped, not scored as zero.
    gt.remove(&("p".to_string(), 2));
    let ev = evaluate_timelines(&[tl], &gt, 10.0, TruthMode::MaxAcrossViews);
    assert_eq!((ev.report.tp, ev.report.fn_, ev.report.images), (10, 0, 2));
}

#[test]
fn ratios_are_scale_free() {
    for k in [1u64, 7, 1000] {
        let (p, r) = precision_recall(3 * k, k, 2 * k);
        assert!((p.unwrap() - 0.75).abs() < 1e-12);
        assert!((r.unwrap() - 0.6).abs() < 1e-12);
    }
}
