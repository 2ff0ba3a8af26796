use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use log::info;

use maizeleaf::hull::View;
use maizeleaf::pipeline::{
    detect_day, evaluate_stage, load_manifest, overlay_stage, reconcile_stage, run_dataset, scan_layout, synth,
    Background, Config, Manifest, RunOptions, DEFAULT_PATTERN,
};
use maizeleaf::raster::{segment_plant, BinaryMask, Raster};
use maizeleaf::skeleton::{extract_graph, skeletonize_with_cutoff};

/// Maize leaf detection, counting and tracking.
#[derive(Parser, Debug)]
#[command(name = "maizeleaf", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// TOML config; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON dataset manifest.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// Output directory (or output file for single-image commands).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reuse stage outputs already present under --out.
    #[arg(long, global = true)]
    resume: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Segment one image against its background and write the mask PNG.
    Segment {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        background: PathBuf,
    },
    /// Thin a mask PNG and write the skeleton PNG; prints the graph summary.
    Skeletonize {
        #[arg(long)]
        mask: PathBuf,
        /// Days since emergence (selects the thinning algorithm).
        #[arg(long)]
        dse: u32,
    },
    /// Detect leaves on one plant-day from its two views.
    Detect {
        #[arg(long)]
        view0: Option<PathBuf>,
        #[arg(long)]
        view90: Option<PathBuf>,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        dse: u32,
        #[arg(long, default_value = "plant")]
        plant: String,
        #[arg(long, default_value_t = 1)]
        day: u32,
    },
    /// Full pipeline over a manifest.
    Run {
        /// Also render overlay PNGs.
        #[arg(long)]
        overlays: bool,
    },
    /// Re-run temporal reconciliation on the detect stage under --out.
    Reconcile,
    /// Score the reconciled results under --out against ground truth.
    Evaluate {
        /// Ground-truth JSON; defaults to the one named by --manifest.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Render overlay PNGs for the reconciled results under --out.
    Overlay,
    /// Generate the synthetic fixture dataset into --out.
    Synth {
        #[arg(long, default_value_t = 5)]
        plants: usize,
        #[arg(long, default_value_t = 27)]
        days: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        no_spur: bool,
        #[arg(long)]
        no_occlusion: bool,
    },
    /// Build a manifest by scanning a directory; written to --manifest or stdout.
    Manifest {
        #[arg(long)]
        root: PathBuf,
        /// Shared background image, relative to --root.
        #[arg(long)]
        background: PathBuf,
        #[arg(long, default_value = DEFAULT_PATTERN)]
        pattern: String,
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
}

/// An error that is the caller's fault: exit code 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn require<'a>(v: &'a Option<PathBuf>, flag: &str, cmd: &str) -> anyhow::Result<&'a Path> {
    v.as_deref().ok_or_else(|| usage(format!("`{cmd}` needs {flag}")))
}

fn load_config(g: &Global) -> anyhow::Result<Config> {
    let cfg = match &g.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    cfg.validate()?;
    info!("config hash {}", cfg.hash());
    Ok(cfg)
}

fn write_json(out: Option<&Path>, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            match writeln!(stdout, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                r => r?,
            }
        }
    }
    Ok(())
}

/// Returns whether partial failures were recorded.
fn execute(cli: Cli) -> anyhow::Result<bool> {
    let g = &cli.global;
    if let Some(n) = g.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
    }
    match &cli.command {
        Command::Segment { image, background } => {
            let cfg = load_config(g)?;
            let out = require(&g.out, "--out <mask.png>", "segment")?;
            let mask = segment_plant(&Raster::load(image)?, &Raster::load(background)?, &cfg.segmentation)?;
            mask.save_png(out)?;
            println!("{}", serde_json::json!({ "area": mask.count(), "mask": out }));
        }
        Command::Skeletonize { mask, dse } => {
            let cfg = load_config(g)?;
            let out = require(&g.out, "--out <skeleton.png>", "skeletonize")?;
            let m = BinaryMask::load(mask)?;
            let skel = skeletonize_with_cutoff(&m, *dse, cfg.skeleton.last_fast_parallel_day)?;
            skel.save_png(out)?;
            let graph = extract_graph(&skel);
            let kinds = graph.nodes.iter().fold(BTreeMap::new(), |mut acc, n| {
                *acc.entry(format!("{:?}", n.kind).to_lowercase()).or_insert(0usize) += 1;
                acc
            });
            println!(
                "{}",
                serde_json::json!({ "pixels": skel.count(), "nodes": kinds, "edges": graph.edges.len(), "skeleton": out })
            );
        }
        Command::Detect { view0, view90, background, dse, plant, day } => {
            let cfg = load_config(g)?;
            if view0.is_none() && view90.is_none() {
                return Err(usage("`detect` needs --view0 and/or --view90"));
            }
            let bg = Raster::load(background)?;
            let mut masks = BTreeMap::new();
            for (v, p) in [(View::View0, view0), (View::View90, view90)] {
                if let Some(p) = p {
                    masks.insert(v, segment_plant(&Raster::load(p)?, &bg, &cfg.segmentation)?);
                }
            }
            let rec = detect_day(plant, *day, *dse, &masks, &cfg)?;
            let det = maizeleaf::pipeline::output::detections_of(
                &[maizeleaf::pipeline::PlantTimeline { plant_id: plant.clone(), records: vec![rec] }],
                &cfg.hash(),
            );
            write_json(g.out.as_deref(), &det)?;
        }
        Command::Run { overlays } => {
            let cfg = load_config(g)?;
            let manifest = load_manifest(require(&g.manifest, "--manifest", "run")?)?;
            let out = require(&g.out, "--out", "run")?;
            let opts = RunOptions {
                out: Some(out.to_path_buf()),
                resume: g.resume,
                jobs: g.jobs,
                overlays: *overlays,
            };
            let run = run_dataset(&manifest, &cfg, &opts)?;
            let leaves: usize = run.timelines.iter().flat_map(|t| &t.records).map(|r| r.leaf_count()).sum();
            eprintln!(
                "{} plants, {} leaves, {} failures, {} missing slots -> {}",
                run.timelines.len(),
                leaves,
                run.failures.len(),
                run.missing.len(),
                out.display()
            );
            if let Some(e) = &run.evaluation {
                eprintln!("recall {:?} precision {:?}", e.report.recall, e.report.precision);
            }
            return Ok(run.has_failures());
        }
        Command::Reconcile => {
            let out = require(&g.out, "--out", "reconcile")?;
            let cfg = config_for_out(g, out)?;
            let run = reconcile_stage(out, &cfg)?;
            eprintln!("reconciled {} plants -> {}", run.timelines.len(), out.display());
        }
        Command::Evaluate { truth } => {
            let out = require(&g.out, "--out", "evaluate")?;
            let cfg = config_for_out(g, out)?;
            let truth = match (truth, &g.manifest) {
                (Some(t), _) => t.clone(),
                (None, Some(m)) => {
                    let manifest = load_manifest(m)?;
                    let t = manifest
                        .ground_truth
                        .as_ref()
                        .ok_or_else(|| usage("the manifest names no ground truth; pass --truth"))?;
                    manifest.resolve(t)
                }
                (None, None) => return Err(usage("`evaluate` needs --truth or --manifest")),
            };
            let eval = evaluate_stage(out, &truth, &cfg)?;
            write_json(None, &eval.report)?;
        }
        Command::Overlay => {
            let out = require(&g.out, "--out", "overlay")?;
            let cfg = config_for_out(g, out)?;
            let manifest: Manifest = load_manifest(require(&g.manifest, "--manifest", "overlay")?)?;
            let n = overlay_stage(out, &manifest, &cfg)?;
            eprintln!("{n} overlays -> {}", out.join("overlays").display());
        }
        Command::Synth { plants, days, seed, no_spur, no_occlusion } => {
            let out = require(&g.out, "--out", "synth")?;
            let params = synth::SynthParams {
                plants: *plants,
                days: *days,
                seed: *seed,
                inject_spur: !no_spur,
                inject_occlusion: !no_occlusion,
                ..Default::default()
            };
            let ds = synth::generate_dataset(out, &params)?;
            eprintln!("{} plants x {} days -> {}", plants, days, ds.manifest.display());
        }
        Command::Manifest { root, background, pattern, ground_truth } => {
            let mut m = scan_layout(root, pattern, Background::Shared(background.clone()))?;
            m.ground_truth = ground_truth.clone();
            if m.entries.is_empty() {
                return Err(usage(format!("no files under {} match {pattern:?}", root.display())));
            }
            eprintln!("{} images, {} missing slots", m.entries.len(), m.missing.len());
            let root_abs = std::fs::canonicalize(root).with_context(|| format!("resolving {}", root.display()))?;
            m.root = root_abs;
            write_json(g.manifest.as_deref(), &m)?;
        }
    }
    Ok(false)
}

/// The config of a previous run under `out`, unless --config overrides it.
fn config_for_out(g: &Global, out: &Path) -> anyhow::Result<Config> {
    if g.config.is_some() {
        return load_config(g);
    }
    match maizeleaf::pipeline::output::read_run_info(out) {
        Ok(info) => Ok(info.config),
        Err(_) if !out.join("run.json").exists() => load_config(g),
        Err(e) => bail!(e),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use maizeleaf::Error as E;
    if e.downcast_ref::<Usage>().is_some() {
        return 2;
    }
    match e.downcast_ref::<E>() {
        Some(E::InvalidInput(_) | E::Config(_) | E::Manifest(_)) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
