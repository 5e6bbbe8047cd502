//! Command-line surface binding the pipeline: generate, parse, build graphs,
//! rasterize, train, infer, assemble, evaluate, report.
//!
//! Every run writes a `manifest.json` beside its outputs recording the tool
//! version, resolved seeds and configs, and a timestamp — the timestamp is
//! the only nondeterministic byte any invocation produces. Exit codes: 0 on
//! success, 1 on input or usage errors, 2 on internal invariant violations.
//! Verbosity is controlled by the `PANCAD_LOG` environment variable
//! (error/warn/info/debug). A `key = value` config file supplies defaults for
//! any long flag; explicit flags win.

use std::collections::BTreeMap;
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::catalog::{Label, LabelCatalog};
use crate::drawing::{group_symbols, gt_instance_boxes, Drawing};
use crate::gcn::{
    infer_entity_labels, load_checkpoint, save_checkpoint, trace_to_csv, train_gcn, Checkpoint,
    FeatureConfig, GcnError, TrainConfig, CHECKPOINT_VERSION,
};
use crate::graph::{build_graph, GraphConfig};
use crate::io::{load_boxes, load_drawing, save_drawing};
use crate::metrics::{
    detection_ap, length_histogram, report_json, report_table, semantic_scores, DetectionItem,
    LengthHistogram, PanopticScores, SemanticScores,
};
use crate::panoptic::{assemble_panoptic_with, prediction_to_drawing, UnboxedPolicy};
use crate::raster::render_label_mask;
use crate::synth::{generate_floorplan, SynthConfig};

#[derive(Parser)]
#[command(name = "pancad", version, about = "Panoptic symbol spotting toolkit for vector floor plans")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Defaults file with `key = value` lines; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed for generation, graph capping, and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default 1); never changes numeric output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Graph connection radius in mm.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Parallel-distance scale in (0, 1].
    #[arg(long, global = true)]
    eta: Option<f64>,
    /// Maximum node degree.
    #[arg(long, global = true)]
    kmax: Option<usize>,
    /// Raster resolution in pixels per mm.
    #[arg(long = "scale-ppm", global = true)]
    scale_ppm: Option<f64>,
    /// Training iterations.
    #[arg(long, global = true)]
    iters: Option<usize>,
    /// Peak learning rate of the cosine schedule.
    #[arg(long, global = true)]
    lr: Option<f64>,
    /// Additive margin of the classification loss.
    #[arg(long, global = true)]
    margin: Option<f64>,
    /// Cosine scale of the classification loss.
    #[arg(long = "loss-scale", global = true)]
    loss_scale: Option<f64>,
    /// Weight of the node classification term in the total objective.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Class catalog: "small" (5 classes) or "full" (30 classes).
    #[arg(long, global = true)]
    classes: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate synthetic labeled floor-plan blocks.
    Gen {
        /// Output directory for the drawing files.
        #[arg(long)]
        out: PathBuf,
        /// Number of blocks; seeds run from --seed upward.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long = "rooms-x")]
        rooms_x: Option<usize>,
        #[arg(long = "rooms-y")]
        rooms_y: Option<usize>,
        /// Draw solid walls instead of carving openings.
        #[arg(long)]
        solid: bool,
    },
    /// Convert a DXF file to the JSON-lines drawing format.
    ParseDxf {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build the entity graph of a drawing and write it as JSON.
    Graph {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render the label mask of a drawing to a PGM image.
    Rasterize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Stroke width in pixels.
        #[arg(long = "width-px", default_value_t = 5.0)]
        width_px: f64,
    },
    /// Train the node classifier on a directory of labeled drawings.
    Train {
        /// Directory of *.jsonl training drawings.
        #[arg(long)]
        data: PathBuf,
        /// Checkpoint path; a loss trace CSV is written beside it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict per-entity labels with a trained checkpoint.
    Infer {
        #[arg(long)]
        model: PathBuf,
        /// Drawing file, or directory of drawings.
        #[arg(long)]
        input: PathBuf,
        /// Label file, or directory when --input is a directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine entity labels with detection boxes into a panoptic drawing.
    Assemble {
        /// Drawing file, or directory of drawings.
        #[arg(long)]
        input: PathBuf,
        /// Label file or directory (as written by infer); defaults to the
        /// drawing's own labels.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Detection box file or directory.
        #[arg(long)]
        boxes: Option<PathBuf>,
        /// Use the ground-truth boxes of the input drawing itself.
        #[arg(long = "gt-boxes")]
        gt_boxes: bool,
        /// Demote unboxed thing entities to background.
        #[arg(long = "demote-unboxed")]
        demote_unboxed: bool,
        /// Output drawing file, or directory when --input is a directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth and print a report.
    Eval {
        #[arg(value_enum)]
        mode: EvalMode,
        /// Ground-truth drawing file or directory.
        #[arg(long)]
        gt: PathBuf,
        /// Prediction file or directory: drawings for semantic/panoptic,
        /// box files for instance.
        #[arg(long)]
        pred: PathBuf,
        /// Write the JSON report here (the table always prints to stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Entity statistics: class counts and the length histogram.
    Stats {
        /// Drawing file or directory.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalMode {
    Semantic,
    Instance,
    Panoptic,
}

/// Failures split by exit code: bad inputs (1) vs broken invariants (2).
#[derive(Debug)]
enum Failure {
    Input(String),
    Internal(String),
}

impl Failure {
    fn input(msg: impl Into<String>) -> Self {
        Failure::Input(msg.into())
    }
}

impl From<crate::io::FormatError> for Failure {
    fn from(e: crate::io::FormatError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<crate::synth::SynthError> for Failure {
    fn from(e: crate::synth::SynthError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<crate::raster::RasterError> for Failure {
    fn from(e: crate::raster::RasterError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<crate::metrics::MetricsError> for Failure {
    fn from(e: crate::metrics::MetricsError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<crate::panoptic::PanopticError> for Failure {
    fn from(e: crate::panoptic::PanopticError) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<GcnError> for Failure {
    fn from(e: GcnError) -> Self {
        match e {
            // Shape mismatches mean the pipeline itself broke its contract.
            GcnError::DimensionMismatch { .. } => Failure::Internal(e.to_string()),
            other => Failure::Input(other.to_string()),
        }
    }
}

/// Parsed `key = value` defaults file. Keys mirror the long flags, with `-`
/// and `_` interchangeable; `#` starts a comment.
#[derive(Default)]
struct FileConfig {
    values: BTreeMap<String, String>,
}

const CONFIG_KEYS: &[&str] = &[
    "seed",
    "threads",
    "epsilon",
    "eta",
    "kmax",
    "scale_ppm",
    "iters",
    "lr",
    "margin",
    "loss_scale",
    "lambda",
    "classes",
    "count",
    "rooms_x",
    "rooms_y",
    "wall_thickness",
    "door_density",
    "window_density",
    "parking_density",
    "furniture_density",
    "width_px",
];

impl FileConfig {
    fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Failure::input(format!("config line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Failure::input(format!("config line {}: unknown key {key:?}", lineno + 1)));
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(FileConfig { values })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure> {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| Failure::input(format!("config key {key}: bad value {raw:?}"))),
        }
    }
}

/// Flag values with config-file fallback already applied.
struct Resolved {
    seed: u64,
    threads: usize,
    graph: GraphConfig,
    train: TrainConfig,
    scale_ppm: Option<f64>,
    catalog: LabelCatalog,
    file: FileConfig,
}

fn resolve(c: &Common) -> Result<Resolved, Failure> {
    let file = match &c.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    macro_rules! pick {
        ($flag:expr, $key:literal) => {
            match $flag {
                Some(v) => Some(v),
                None => file.get($key)?,
            }
        };
    }
    let seed = pick!(c.seed, "seed").unwrap_or(0);
    let threads = pick!(c.threads, "threads").unwrap_or(1);
    if threads == 0 {
        return Err(Failure::input("--threads must be at least 1"));
    }

    let mut graph = GraphConfig::default();
    graph.seed = seed;
    if let Some(v) = pick!(c.epsilon, "epsilon") {
        graph.epsilon = v;
    }
    if let Some(v) = pick!(c.eta, "eta") {
        graph.eta = v;
    }
    if let Some(v) = pick!(c.kmax, "kmax") {
        graph.k_max = v;
    }
    if graph.epsilon <= 0.0 || !(0.0..=1.0).contains(&graph.eta) || graph.eta == 0.0 {
        return Err(Failure::input("need epsilon > 0 and eta in (0, 1]"));
    }
    if graph.k_max == 0 {
        return Err(Failure::input("--kmax must be at least 1"));
    }

    let mut train = TrainConfig::default();
    train.seed = seed;
    if let Some(v) = pick!(c.iters, "iters") {
        train.iterations = v;
    }
    if let Some(v) = pick!(c.lr, "lr") {
        train.lr_max = v;
    }
    if let Some(v) = pick!(c.margin, "margin") {
        train.margin = v;
    }
    if let Some(v) = pick!(c.loss_scale, "loss_scale") {
        train.scale = v;
    }
    if let Some(v) = pick!(c.lambda, "lambda") {
        train.lambda = v;
    }

    let scale_ppm = pick!(c.scale_ppm, "scale_ppm");
    if let Some(s) = scale_ppm {
        if s <= 0.0 {
            return Err(Failure::input("--scale-ppm must be positive"));
        }
    }

    let catalog = match pick!(c.classes.clone(), "classes").as_deref() {
        None | Some("small") => LabelCatalog::small(),
        Some("full") => LabelCatalog::full(),
        Some(other) => {
            return Err(Failure::input(format!("--classes must be small or full, got {other:?}")))
        }
    };

    Ok(Resolved { seed, threads, graph, train, scale_ppm, catalog, file })
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Manifest location: `manifest.json` in an output directory, or
/// `<stem>.manifest.json` beside an output file.
fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.join("manifest.json")
    } else {
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
        out.with_file_name(format!("{stem}.manifest.json"))
    }
}

fn write_manifest(out: &Path, command: &str, detail: serde_json::Value) -> Result<(), Failure> {
    let manifest = json!({
        "tool": "pancad",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "timestamp": timestamp(),
        "detail": detail,
    });
    let path = manifest_path(out);
    let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serialize");
    body.push('\n');
    std::fs::write(&path, body)?;
    info!("manifest written to {}", path.display());
    Ok(())
}

fn make_pool(threads: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Failure::Internal(format!("thread pool: {e}")))
}

/// Sorted files in a directory whose name passes the filter.
fn listed_files(dir: &Path, keep: impl Fn(&str) -> bool) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)
        .map_err(|e| Failure::input(format!("{}: {e}", dir.display())))?
    {
        let entry = entry?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if entry.file_type()?.is_file() && keep(&name) {
            files.push(entry.path());
        }
    }
    files.sort();
    Ok(files)
}

/// A drawing path argument: one file, or every *.jsonl in a directory.
fn drawing_paths(path: &Path) -> Result<Vec<PathBuf>, Failure> {
    if path.is_dir() {
        let files = listed_files(path, |n| n.ends_with(".jsonl"))?;
        if files.is_empty() {
            return Err(Failure::input(format!("no *.jsonl files in {}", path.display())));
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

fn load_drawings(paths: &[PathBuf], pool: &rayon::ThreadPool) -> Result<Vec<Drawing>, Failure> {
    pool.install(|| {
        paths
            .par_iter()
            .map(|p| {
                load_drawing(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
            })
            .collect()
    })
}

fn stem_of(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("drawing").to_string()
}

/// Per-entity labels as written by `infer` and read by `assemble`.
#[derive(Serialize, Deserialize)]
struct LabelsFile {
    id: String,
    labels: Vec<String>,
}

fn write_labels(path: &Path, d: &Drawing, labels: &[Label]) -> Result<(), Failure> {
    let file = LabelsFile {
        id: d.id.clone(),
        labels: labels.iter().map(|&l| d.catalog.label_name(l).to_string()).collect(),
    };
    let mut body = serde_json::to_string_pretty(&file).expect("labels serialize");
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

fn read_labels(path: &Path, d: &Drawing) -> Result<Vec<Label>, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let file: LabelsFile = serde_json::from_str(&text)
        .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if file.labels.len() != d.records.len() {
        return Err(Failure::input(format!(
            "{}: {} labels for {} entities",
            path.display(),
            file.labels.len(),
            d.records.len()
        )));
    }
    file.labels
        .iter()
        .map(|name| {
            d.catalog
                .parse_label(name)
                .ok_or_else(|| Failure::input(format!("{}: unknown label {name:?}", path.display())))
        })
        .collect()
}

/// Entry point for the `pancad` binary.
pub fn run<I: IntoIterator<Item = String>>(argv: I) -> i32 {
    init_logging();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match std::panic::catch_unwind(AssertUnwindSafe(|| execute(cli))) {
        Ok(Ok(())) => 0,
        Ok(Err(Failure::Input(msg))) => {
            eprintln!("error: {msg}");
            1
        }
        Ok(Err(Failure::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            2
        }
        Err(_) => {
            // The default panic hook has already printed the message.
            eprintln!("internal error: panic");
            2
        }
    }
}

fn init_logging() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        let env = env_logger::Env::new().filter_or("PANCAD_LOG", "warn");
        let _ = env_logger::Builder::from_env(env).try_init();
    });
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let r = resolve(&cli.common)?;
    let pool = make_pool(r.threads)?;
    match cli.cmd {
        Cmd::Gen { out, count, rooms_x, rooms_y, solid } => {
            cmd_gen(&r, &pool, &out, count, rooms_x, rooms_y, solid)
        }
        Cmd::ParseDxf { input, out } => cmd_parse_dxf(&input, &out),
        Cmd::Graph { input, out } => cmd_graph(&r, &input, &out),
        Cmd::Rasterize { input, out, width_px } => cmd_rasterize(&r, &input, &out, width_px),
        Cmd::Train { data, out } => cmd_train(&r, &pool, &data, &out),
        Cmd::Infer { model, input, out } => cmd_infer(&pool, &model, &input, &out),
        Cmd::Assemble { input, labels, boxes, gt_boxes, demote_unboxed, out } => {
            cmd_assemble(&pool, &input, labels.as_deref(), boxes.as_deref(), gt_boxes, demote_unboxed, &out)
        }
        Cmd::Eval { mode, gt, pred, out } => cmd_eval(&r, &pool, mode, &gt, &pred, out.as_deref()),
        Cmd::Stats { input, out } => cmd_stats(&pool, &input, out.as_deref()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen(
    r: &Resolved,
    pool: &rayon::ThreadPool,
    out: &Path,
    count: usize,
    rooms_x: Option<usize>,
    rooms_y: Option<usize>,
    solid: bool,
) -> Result<(), Failure> {
    if count == 0 {
        return Err(Failure::input("--count must be at least 1"));
    }
    let mut base = SynthConfig { seed: r.seed, catalog: r.catalog.clone(), ..SynthConfig::default() };
    if let Some(v) = rooms_x.map_or(r.file.get("rooms_x")?, Some) {
        base.rooms_x = v;
    }
    if let Some(v) = rooms_y.map_or(r.file.get("rooms_y")?, Some) {
        base.rooms_y = v;
    }
    if let Some(v) = r.file.get("wall_thickness")? {
        base.wall_thickness = v;
    }
    if let Some(v) = r.file.get("door_density")? {
        base.door_density = v;
    }
    if let Some(v) = r.file.get("window_density")? {
        base.window_density = v;
    }
    if let Some(v) = r.file.get("parking_density")? {
        base.parking_density = v;
    }
    if let Some(v) = r.file.get("furniture_density")? {
        base.furniture_density = v;
    }
    if solid {
        base.overlap_free = false;
    }

    std::fs::create_dir_all(out)?;
    let written: Vec<String> = pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|k| {
                let cfg = SynthConfig { seed: base.seed.wrapping_add(k as u64), ..base.clone() };
                let d = generate_floorplan(&cfg)?;
                let name = format!("{}.jsonl", d.id);
                save_drawing(&d, out.join(&name))?;
                Ok(name)
            })
            .collect::<Result<_, Failure>>()
    })?;
    info!("generated {} drawings in {}", written.len(), out.display());
    write_manifest(
        out,
        "gen",
        json!({
            "seed": r.seed,
            "count": count,
            "threads": r.threads,
            "rooms": [base.rooms_x, base.rooms_y],
            "wall_thickness": base.wall_thickness,
            "densities": {
                "door": base.door_density,
                "window": base.window_density,
                "parking": base.parking_density,
                "furniture": base.furniture_density,
            },
            "overlap_free": base.overlap_free,
            "classes": r.catalog.names(),
            "outputs": written,
        }),
    )
}

fn cmd_parse_dxf(input: &Path, out: &Path) -> Result<(), Failure> {
    let import = crate::dxf::parse_file(input)
        .map_err(|e| Failure::input(format!("{}: {e}", input.display())))?;
    if import.skipped > 0 {
        warn!("skipped {} unsupported entities", import.skipped);
    }
    save_drawing(&import.drawing, out)?;
    write_manifest(
        out,
        "parse-dxf",
        json!({
            "input": input.display().to_string(),
            "output": out.display().to_string(),
            "entities": import.drawing.records.len(),
            "skipped": import.skipped,
        }),
    )
}

fn cmd_graph(r: &Resolved, input: &Path, out: &Path) -> Result<(), Failure> {
    let d = load_drawing(input)?;
    let g = build_graph(&d, &r.graph);
    std::fs::write(out, g.to_json())?;
    write_manifest(
        out,
        "graph",
        json!({
            "input": input.display().to_string(),
            "config": r.graph,
            "nodes": g.node_count(),
            "edges": g.edges().len(),
        }),
    )
}

fn cmd_rasterize(r: &Resolved, input: &Path, out: &Path, width_px: f64) -> Result<(), Failure> {
    let d = load_drawing(input)?;
    let scale = r.scale_ppm.unwrap_or(1.0);
    let mask = render_label_mask(&d, scale, width_px)?;
    std::fs::write(out, mask.to_pgm())?;
    write_manifest(
        out,
        "rasterize",
        json!({
            "input": input.display().to_string(),
            "scale_ppm": scale,
            "width_px": width_px,
            "size": [mask.width(), mask.height()],
        }),
    )
}

fn cmd_train(
    r: &Resolved,
    pool: &rayon::ThreadPool,
    data: &Path,
    out: &Path,
) -> Result<(), Failure> {
    let paths = drawing_paths(data)?;
    let dataset = load_drawings(&paths, pool)?;
    let mut feature = FeatureConfig::default();
    if let Some(s) = r.scale_ppm {
        feature.pyramid.scale = s;
    }
    info!("training on {} drawings for {} iterations", dataset.len(), r.train.iterations);
    let outcome = train_gcn(&dataset, &r.train, &r.graph, &feature)?;
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        train: r.train.clone(),
        feature: feature.clone(),
        graph: r.graph.clone(),
        params: outcome.params,
    };
    save_checkpoint(out, &ckpt)?;
    let trace_path = out.with_file_name(format!("{}.trace.csv", stem_of(out)));
    std::fs::write(&trace_path, trace_to_csv(&outcome.trace))?;
    write_manifest(
        out,
        "train",
        json!({
            "data": data.display().to_string(),
            "drawings": dataset.len(),
            "train": r.train,
            "graph": r.graph,
            "feature": feature,
            "threads": r.threads,
            "outputs": [out.display().to_string(), trace_path.display().to_string()],
        }),
    )
}

fn cmd_infer(
    pool: &rayon::ThreadPool,
    model: &Path,
    input: &Path,
    out: &Path,
) -> Result<(), Failure> {
    let ckpt = load_checkpoint(model)?;
    let paths = drawing_paths(input)?;
    let drawings = load_drawings(&paths, pool)?;
    let many = input.is_dir();
    if many {
        std::fs::create_dir_all(out)?;
    }
    let outputs: Vec<String> = pool.install(|| {
        paths
            .par_iter()
            .zip(&drawings)
            .map(|(p, d)| {
                let labels = infer_entity_labels(d, &ckpt.params, &ckpt.graph, &ckpt.feature)?;
                let dest = if many {
                    out.join(format!("{}.labels.json", stem_of(p)))
                } else {
                    out.to_path_buf()
                };
                write_labels(&dest, d, &labels)?;
                Ok(dest.display().to_string())
            })
            .collect::<Result<_, Failure>>()
    })?;
    write_manifest(
        out,
        "infer",
        json!({
            "model": model.display().to_string(),
            "input": input.display().to_string(),
            "outputs": outputs,
        }),
    )
}

fn cmd_assemble(
    pool: &rayon::ThreadPool,
    input: &Path,
    labels: Option<&Path>,
    boxes: Option<&Path>,
    gt_boxes: bool,
    demote_unboxed: bool,
    out: &Path,
) -> Result<(), Failure> {
    if boxes.is_some() == gt_boxes {
        return Err(Failure::input("pass exactly one of --boxes and --gt-boxes"));
    }
    let policy = if demote_unboxed { UnboxedPolicy::Demote } else { UnboxedPolicy::KeepSemantic };
    let paths = drawing_paths(input)?;
    let drawings = load_drawings(&paths, pool)?;
    let many = input.is_dir();
    if many {
        std::fs::create_dir_all(out)?;
    }
    let side_path = |root: &Path, stem: &str, suffix: &str| {
        if many {
            root.join(format!("{stem}{suffix}"))
        } else {
            root.to_path_buf()
        }
    };
    let outputs: Vec<String> = pool.install(|| {
        paths
            .par_iter()
            .zip(&drawings)
            .map(|(p, d)| {
                let stem = stem_of(p);
                let entity_labels = match labels {
                    Some(root) => read_labels(&side_path(root, &stem, ".labels.json"), d)?,
                    None => d.labels(),
                };
                let instance_boxes = match boxes {
                    Some(root) => {
                        load_boxes(side_path(root, &stem, ".boxes.json"), &d.catalog)?
                    }
                    None => gt_instance_boxes(d),
                };
                let pred = assemble_panoptic_with(d, &entity_labels, &instance_boxes, policy)?;
                let pd = prediction_to_drawing(d, &pred);
                let dest =
                    if many { out.join(format!("{stem}.jsonl")) } else { out.to_path_buf() };
                save_drawing(&pd, &dest)?;
                Ok(dest.display().to_string())
            })
            .collect::<Result<_, Failure>>()
    })?;
    write_manifest(
        out,
        "assemble",
        json!({
            "input": input.display().to_string(),
            "labels": labels.map(|p| p.display().to_string()),
            "boxes": boxes.map(|p| p.display().to_string()),
            "gt_boxes": gt_boxes,
            "policy": if demote_unboxed { "demote" } else { "keep_semantic" },
            "outputs": outputs,
        }),
    )
}

/// Pair ground truth and prediction paths positionally after sorting both
/// sides by file name.
fn paired(gt: &[PathBuf], pred: &[PathBuf]) -> Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if gt.len() != pred.len() {
        return Err(Failure::input(format!(
            "{} ground-truth files vs {} prediction files",
            gt.len(),
            pred.len()
        )));
    }
    Ok(gt.iter().cloned().zip(pred.iter().cloned()).collect())
}

fn cmd_eval(
    r: &Resolved,
    pool: &rayon::ThreadPool,
    mode: EvalMode,
    gt: &Path,
    pred: &Path,
    out: Option<&Path>,
) -> Result<(), Failure> {
    let gt_paths = drawing_paths(gt)?;
    let gts = load_drawings(&gt_paths, pool)?;
    let catalog = gts[0].catalog.clone();
    for d in &gts {
        if d.catalog != catalog {
            return Err(Failure::input(format!("drawing {} uses a different catalog", d.id)));
        }
    }

    let mut semantic: Option<SemanticScores> = None;
    let mut detection = None;
    let mut panoptic: Option<PanopticScores> = None;
    match mode {
        EvalMode::Semantic | EvalMode::Panoptic => {
            let pred_paths = drawing_paths(pred)?;
            paired(&gt_paths, &pred_paths)?;
            let preds = load_drawings(&pred_paths, pool)?;
            if mode == EvalMode::Semantic {
                let parts: Vec<SemanticScores> = pool.install(|| {
                    preds
                        .par_iter()
                        .zip(&gts)
                        .map(|(p, g)| {
                            semantic_scores(&p.labels(), &g.labels(), g).map_err(Failure::from)
                        })
                        .collect::<Result<_, _>>()
                })?;
                let mut total = SemanticScores::default();
                for part in parts {
                    total.merge(&part);
                }
                semantic = Some(total);
            } else {
                // Panoptic scoring pools per-drawing tallies before ratios.
                let parts: Vec<PanopticScores> = pool.install(|| {
                    preds
                        .par_iter()
                        .zip(&gts)
                        .map(|(p, g)| {
                            let mut s = PanopticScores::default();
                            s.add_drawing(&group_symbols(p), &group_symbols(g), g);
                            s
                        })
                        .collect()
                });
                let mut total = PanopticScores::default();
                for part in parts {
                    total.merge(&part);
                }
                panoptic = Some(total);
            }
        }
        EvalMode::Instance => {
            let pred_paths = if pred.is_dir() {
                listed_files(pred, |n| n.ends_with(".boxes.json"))?
            } else {
                vec![pred.to_path_buf()]
            };
            let pairs = paired(&gt_paths, &pred_paths)?;
            let mut pred_items = Vec::new();
            let mut gt_items = Vec::new();
            for ((_, pred_path), g) in pairs.iter().zip(&gts) {
                for item in load_boxes(pred_path, &catalog)? {
                    pred_items.push(DetectionItem { drawing: g.id.clone(), item });
                }
                for item in gt_instance_boxes(g) {
                    gt_items.push(DetectionItem { drawing: g.id.clone(), item });
                }
            }
            detection = Some(detection_ap(&pred_items, &gt_items));
        }
    }

    let table = report_table(&catalog, semantic.as_ref(), detection.as_ref(), panoptic.as_ref());
    print!("{table}");
    if let Some(out) = out {
        let report =
            report_json(&catalog, semantic.as_ref(), detection.as_ref(), panoptic.as_ref());
        std::fs::write(out, report)?;
        write_manifest(
            out,
            "eval",
            json!({
                "mode": format!("{mode:?}").to_lowercase(),
                "gt": gt.display().to_string(),
                "pred": pred.display().to_string(),
                "drawings": gts.len(),
                "threads": r.threads,
            }),
        )?;
    }
    Ok(())
}

fn cmd_stats(pool: &rayon::ThreadPool, input: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let paths = drawing_paths(input)?;
    let drawings = load_drawings(&paths, pool)?;
    let catalog = drawings[0].catalog.clone();
    let hist = length_histogram(&drawings);
    let mut class_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut background = 0usize;
    for d in &drawings {
        for rec in &d.records {
            match rec.label {
                Label::Background => background += 1,
                Label::Class(c) => {
                    *class_counts.entry(d.catalog.name(c).to_string()).or_default() += 1
                }
            }
        }
    }
    let bins: Vec<serde_json::Value> = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let (lo, hi) = LengthHistogram::bin_edges(i);
            json!({ "lo_mm": lo, "hi_mm": hi, "count": count })
        })
        .collect();
    let stats = json!({
        "drawings": drawings.len(),
        "entities": hist.total(),
        "classes": catalog.names(),
        "per_class": class_counts,
        "background": background,
        "length_histogram": bins,
    });
    let mut body = serde_json::to_string_pretty(&stats).expect("stats serialize");
    body.push('\n');
    print!("{body}");
    if let Some(out) = out {
        std::fs::write(out, &body)?;
        write_manifest(
            out,
            "stats",
            json!({ "input": input.display().to_string(), "drawings": drawings.len() }),
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_vec(args: &[&str]) -> i32 {
        run(args.iter().map(|s| s.to_string()))
    }

    fn tmp_dir(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("pancad-cli-{name}-{}", std::process::id()));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn unknown_flags_are_usage_errors() {
        assert_eq!(run_vec(&["pancad", "--no-such-flag"]), 1);
        assert_eq!(run_vec(&["pancad", "frobnicate"]), 1);
        assert_eq!(run_vec(&["pancad", "--help"]), 0);
    }

    #[test]
    fn missing_input_exits_one() {
        assert_eq!(run_vec(&["pancad", "graph", "--input", "/no/such/file.jsonl", "--out", "/tmp/g.json"]), 1);
    }

    #[test]
    fn gen_rerun_is_identical() {
        let dir = tmp_dir("gen");
        let out1 = dir.join("a");
        let out2 = dir.join("b");
        for out in [&out1, &out2] {
            let code = run_vec(&[
                "pancad", "gen", "--seed", "7", "--count", "3", "--out",
                out.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
        }
        let names = listed_files(&out1, |n| n.ends_with(".jsonl")).unwrap();
        assert_eq!(names.len(), 3);
        for p in names {
            let q = out2.join(p.file_name().unwrap());
            assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(&q).unwrap(), "{p:?}");
        }
        assert!(out1.join("manifest.json").is_file());
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn eval_panoptic_against_itself_is_perfect() {
        let dir = tmp_dir("self-eval");
        let gen_out = dir.join("d");
        assert_eq!(
            run_vec(&["pancad", "gen", "--seed", "3", "--count", "2", "--out", gen_out.to_str().unwrap()]),
            0
        );
        let report = dir.join("report.json");
        let code = run_vec(&[
            "pancad", "eval", "panoptic",
            "--gt", gen_out.to_str().unwrap(),
            "--pred", gen_out.to_str().unwrap(),
            "--out", report.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let body: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
        let pooled = &body["totals"]["panoptic_pooled"];
        assert_eq!(pooled["pq"], 1.0);
        assert_eq!(pooled["sq"], 1.0);
        assert_eq!(pooled["rq"], 1.0);
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn config_file_defaults_yield_to_flags() {
        let dir = tmp_dir("config");
        let cfg = dir.join("run.conf");
        std::fs::write(&cfg, "seed = 5\nepsilon = 80 # tight\nrooms-x = 4\n").unwrap();
        let common = Common {
            config: Some(cfg.clone()),
            seed: Some(9),
            threads: None,
            epsilon: None,
            eta: None,
            kmax: None,
            scale_ppm: None,
            iters: None,
            lr: None,
            margin: None,
            loss_scale: None,
            lambda: None,
            classes: None,
        };
        let r = resolve(&common).unwrap();
        // The flag wins over the file; file values fill the gaps.
        assert_eq!(r.seed, 9);
        assert_eq!(r.graph.epsilon, 80.0);
        assert_eq!(r.file.get::<usize>("rooms_x").unwrap(), Some(4));

        std::fs::write(&cfg, "no_such_key = 1\n").unwrap();
        let common = Common { seed: None, config: Some(cfg), ..common };
        assert!(matches!(resolve(&common), Err(Failure::Input(_))));
        let _ = std::fs::remove_dir_all(&dir);
    }

    #[test]
    fn stats_reports_class_counts() {
        let dir = tmp_dir("stats");
        let gen_out = dir.join("d");
        assert_eq!(
            run_vec(&["pancad", "gen", "--seed", "1", "--out", gen_out.to_str().unwrap()]),
            0
        );
        let stats_out = dir.join("stats.json");
        assert_eq!(
            run_vec(&[
                "pancad", "stats", "--input", gen_out.to_str().unwrap(),
                "--out", stats_out.to_str().unwrap(),
            ]),
            0
        );
        let body: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&stats_out).unwrap()).unwrap();
        assert_eq!(body["drawings"], 1);
        let entities = body["entities"].as_u64().unwrap();
        assert!(entities > 20);
        let sum: u64 = body["per_class"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(sum, entities);
        let _ = std::fs::remove_dir_all(&dir);
    }
}
