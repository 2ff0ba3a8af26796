use std::path::{Path, PathBuf};

use maizeleaf::hull::View;
use maizeleaf::pipeline::output::read_run_info;
use maizeleaf::pipeline::synth::{generate_dataset, SynthDataset, SynthParams};
use maizeleaf::pipeline::*;
use maizeleaf::raster::Raster;
use maizeleaf::Error;

fn small() -> SynthParams {
    SynthParams {
        plants: 2,
        days: 12,
        ..Default::default()
    }
}

fn dataset(dir: &Path) -> SynthDataset {
    generate_dataset(&dir.join("data"), &small()).unwrap()
}

fn write_manifest(dir: &Path, json: serde_json::Value) -> PathBuf {
    let p = dir.join("manifest.json");
    std::fs::write(&p, serde_json::to_string(&json).unwrap()).unwrap();
    p
}

fn entry(plant: &str, day: u32, view: u16, image: &str) -> serde_json::Value {
    serde_json::json!({ "plant_id": plant, "day": day, "view": view, "image": image })
}

#[test]
fn manifest_rejects_duplicates_and_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.png"), b"").unwrap();
    std::fs::write(dir.path().join("bg.png"), b"").unwrap();

    let dup = write_manifest(
        dir.path(),
        serde_json::json!({
            "background": "bg.png",
            "entries": [entry("p", 1, 0, "a.png"), entry("p", 1, 0, "a.png")],
        }),
    );
    let err = load_manifest(&dup).unwrap_err();
    assert!(matches!(err, Error::Manifest(ref m) if m.contains("duplicate")), "{err}");

    let gone = write_manifest(
        dir.path(),
        serde_json::json!({ "background": "bg.png", "entries": [entry("p", 1, 0, "nope.png")] }),
    );
    let err = load_manifest(&gone).unwrap_err();
    assert!(matches!(err, Error::Manifest(ref m) if m.contains("nope.png")), "{err}");

    let bad_view = write_manifest(
        dir.path(),
        serde_json::json!({ "background": "bg.png", "entries": [entry("p", 1, 45, "a.png")] }),
    );
    assert!(matches!(load_manifest(&bad_view), Err(Error::Manifest(_))));
}

#[test]
fn missing_slots_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.png"), b"").unwrap();
    // 3 plants x 117 days x 2 views = 702 slots, two of them absent.
    let mut entries = Vec::new();
    for plant in ["p1", "p2", "p3"] {
        for day in 1..=117 {
            for view in [0, 90] {
                if (plant, day, view) == ("p2", 40, 90) || (plant, day, view) == ("p3", 117, 0) {
                    continue;
                }
                entries.push(entry(plant, day, view, "a.png"));
            }
        }
    }
    assert_eq!(entries.len(), 700);
    let m = load_manifest(write_manifest(
        dir.path(),
        serde_json::json!({ "background": "a.png", "entries": entries }),
    ))
    .unwrap();
    assert_eq!(
        m.missing,
        vec![("p2".to_string(), 40, View::View90), ("p3".to_string(), 117, View::View0)]
    );
}

#[test]
fn layout_scan_matches_written_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path());
    let written = load_manifest(&ds.manifest).unwrap();
    let scanned = scan_layout(&ds.dir, DEFAULT_PATTERN, Background::Shared("background.png".into())).unwrap();
    let key = |m: &Manifest| {
        let mut v: Vec<_> = m.entries.iter().map(|e| (e.plant_id.clone(), e.day, e.view, e.image.clone())).collect();
        v.sort();
        v
    };
    assert_eq!(key(&scanned), key(&written));
    assert!(scanned.missing.is_empty());
    assert!(scan_layout(&ds.dir, "{plant}/{day}.png", Background::Shared("background.png".into())).is_err());
}

#[test]
fn config_roundtrip_and_hash() {
    let c = Config::scaled_for_height(400);
    let back = Config::from_toml(&c.to_toml()).unwrap();
    assert_eq!(back, c);
    assert_eq!(back.hash(), c.hash());
    assert_eq!(c.hash().len(), 64);
    let mut d = c.clone();
    d.dse.weight_threshold = 0.006;
    assert_ne!(d.hash(), c.hash());
    assert!(matches!(Config::from_toml("version = 1\nbogus = 3\n"), Err(Error::Config(_))));
    assert!(matches!(Config::from_toml("version = 99\n"), Err(Error::Config(_))));
    // Missing sections take their defaults.
    assert_eq!(Config::from_toml(&format!("version = {CONFIG_VERSION}\n")).unwrap(), Config::default());
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn runs_are_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path());
    let m = load_manifest(&ds.manifest).unwrap();
    let cfg = Config::load(&ds.config).unwrap();
    let out = |name: &str| dir.path().join(name);
    let opts = |name: &str, jobs: usize, resume: bool| RunOptions {
        out: Some(out(name)),
        resume,
        jobs: Some(jobs),
        overlays: false,
    };

    let one = run_dataset(&m, &cfg, &opts("a", 1, false)).unwrap();
    let four = run_dataset(&m, &cfg, &opts("b", 4, false)).unwrap();
    assert!(!one.has_failures());
    assert_eq!(one.timelines, four.timelines);
    for f in ["detections.json", "audit.jsonl", "matches.jsonl", "report.json", "metrics.json", "metrics.csv"] {
        assert_eq!(read(out("a").join(f)), read(out("b").join(f)), "{f}");
    }
    assert_eq!(read_run_info(&out("a")).unwrap().config_hash, cfg.hash());

    // Resuming reuses the stage files and reproduces the outputs.
    let again = run_dataset(&m, &cfg, &opts("a", 2, true)).unwrap();
    assert_eq!(again.timelines, one.timelines);
    assert_eq!(read(out("a").join("detections.json")), read(out("b").join("detections.json")));

    let mut other = cfg.clone();
    other.dse.weight_threshold = 0.01;
    let err = run_dataset(&m, &other, &opts("a", 1, true)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");

    // The reconcile stage can be rerun from the detect stage alone.
    let re = reconcile_stage(&out("a"), &cfg).unwrap();
    assert_eq!(re.timelines, one.timelines);
    let ev = evaluate_stage(&out("a"), &ds.ground_truth, &cfg).unwrap();
    assert_eq!(Some(ev), one.evaluation);
}

#[test]
fn missing_images_do_not_stop_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path());
    let mut m = load_manifest(&ds.manifest).unwrap();
    m.entries.retain(|e| !(e.plant_id == ds.plants[0].plant_id && e.day == 10 && e.view == View::View0));
    let m = Manifest::new(m.root.clone(), m.background.clone(), m.entries.clone()).unwrap();
    assert_eq!(m.missing.len(), 1);
    let cfg = Config::load(&ds.config).unwrap();
    let out = dir.path().join("out");
    let run = run_dataset(&m, &cfg, &RunOptions { out: Some(out.clone()), ..Default::default() }).unwrap();
    assert_eq!(run.missing, m.missing);
    let report: serde_json::Value = serde_json::from_str(&read(out.join("report.json"))).unwrap();
    assert_eq!(report["missing_slots"].as_array().unwrap().len(), 1);
    // The day is still processed from its remaining view.
    let tl = &run.timelines[0];
    let day10 = tl.records.iter().find(|r| r.day == 10).unwrap();
    assert_eq!(day10.chosen_view, View::View90);
}

#[test]
fn overlays_match_input_size() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dataset(dir.path());
    let m = load_manifest(&ds.manifest).unwrap();
    let cfg = Config::load(&ds.config).unwrap();
    let out = dir.path().join("out");
    let run = run_dataset(
        &m,
        &cfg,
        &RunOptions {
            out: Some(out.clone()),
            overlays: true,
            ..Default::default()
        },
    )
    .unwrap();
    let emerged: usize = run.timelines.iter().map(|t| t.records.iter().filter(|r| r.emerged()).count()).sum();
    let mut seen = 0;
    for tl in &run.timelines {
        for r in tl.records.iter().filter(|r| r.emerged()) {
            let img = Raster::load(out.join("overlays").join(&tl.plant_id).join(format!("day_{}.png", r.day))).unwrap();
            assert_eq!((img.width(), img.height(), img.channels()), (small().width, small().height, 3));
            seen += 1;
        }
    }
    assert_eq!(seen, emerged);
    assert!(seen > 0);
    assert_eq!(overlay_stage(&out, &m, &cfg).unwrap(), emerged);
}
