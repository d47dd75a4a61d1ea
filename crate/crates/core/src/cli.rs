//! The `rcdamage` command line. Every run writes its outputs plus a JSON run
//! manifest (options, SHA-256 of each input, seed, tool version).
//!
//! Exit codes: 0 success, 2 input or validation error, 3 internal error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::anchor_clustering::{kmeans_iou, sweep_k};
use crate::classifier_eval::{accuracy, confusion};
use crate::cost_model::{quantile, simulate_total, SimulationOptions};
use crate::detector_eval::{evaluate_by_class, match_detections, mean_average_precision, MatchedDetection};
use crate::error::Error;
use crate::formats::{
    load_anchors, load_tensor, save_anchors, AnnotationFile, DetectionFile, FragilityFile, ImageDetections,
    InventoryFile, LabelFile,
};
use crate::fusion::{assess_building, BuildingAssessment};
use crate::report;
use crate::yolo_decode::{decode_tensor, DecodeConfig};
use crate::yolo_loss::{compute_loss, LossWeights};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "rcdamage",
    version,
    about = "Damage-state fusion and repair-cost estimation for RC columns"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decode a raw detector tensor into scored boxes.
    Decode(DecodeArgs),
    /// Cluster annotated box sizes into anchor priors.
    ClusterAnchors(ClusterArgs),
    /// Evaluate the detection loss of a tensor against annotations.
    Loss(LossArgs),
    /// Precision-recall curves and AP for detections.
    EvaluateDetector(EvalDetectorArgs),
    /// Confusion matrix and accuracy for classifier labels.
    EvaluateClassifier(EvalClassifierArgs),
    /// Fuse classifier and detector outputs into damage states.
    Fuse(FuseArgs),
    /// Monte Carlo repair cost for an inventory.
    EstimateCost(CostArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DecodeArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long)]
    pub anchors: PathBuf,
    #[arg(long, default_value_t = DecodeConfig::DEFAULT_SCORE_THRESHOLD)]
    pub score_threshold: f64,
    #[arg(long, default_value_t = DecodeConfig::DEFAULT_NMS_IOU)]
    pub nms_iou: f64,
    /// Output detection file, `-` for stdout.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClusterArgs {
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long)]
    pub k: usize,
    /// Also sweep k over an inclusive range `A..B`.
    #[arg(long, value_parser = parse_range)]
    pub sweep: Option<(usize, usize)>,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Anchor CSV; the sweep goes next to it as `<stem>.sweep.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LossArgs {
    #[arg(long)]
    pub tensor: PathBuf,
    #[arg(long)]
    pub anchors: PathBuf,
    #[arg(long)]
    pub annotations: PathBuf,
    /// Annotated image to compare against; defaults to the first image.
    #[arg(long)]
    pub image_id: Option<String>,
    #[arg(long, default_value_t = 5.0)]
    pub lambda_coord: f64,
    #[arg(long, default_value_t = 0.5)]
    pub lambda_noobj: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalDetectorArgs {
    #[arg(long)]
    pub detections: PathBuf,
    #[arg(long)]
    pub ground_truth: PathBuf,
    #[arg(long, default_value_t = crate::detector_eval::DEFAULT_MATCH_IOU)]
    pub iou: f64,
    #[arg(long)]
    pub out_prefix: String,
    /// Also write a PR-curve SVG per class.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalClassifierArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FuseArgs {
    #[arg(long)]
    pub inventory: PathBuf,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_DET_THRESHOLD)]
    pub det_threshold: f64,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_COLLAPSE_THRESHOLD)]
    pub collapse_threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CostArgs {
    #[arg(long)]
    pub inventory: PathBuf,
    #[arg(long)]
    pub fragility: PathBuf,
    #[arg(long, default_value_t = crate::cost_model::DEFAULT_REALIZATIONS)]
    pub realizations: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Treat tabulated costs as lognormal means instead of medians.
    #[arg(long)]
    pub costs_are_means: bool,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_DET_THRESHOLD)]
    pub det_threshold: f64,
    #[arg(long, default_value_t = crate::fusion::DEFAULT_COLLAPSE_THRESHOLD)]
    pub collapse_threshold: f64,
    #[arg(long)]
    pub out_prefix: String,
    #[arg(long)]
    pub svg: bool,
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected A..B, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a == 0 || a > b {
        return Err(format!("range {s:?} must satisfy 1 <= A <= B"));
    }
    Ok((a, b))
}

#[derive(Debug)]
pub enum CliError {
    Input(Error),
    Internal(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Input(e)
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub options: Value,
    pub input_digests: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub results: Value,
}

struct Run {
    manifest: RunManifest,
}

impl Run {
    fn new(subcommand: &str, options: &impl Serialize, seed: Option<u64>) -> Self {
        Run {
            manifest: RunManifest {
                subcommand: subcommand.to_owned(),
                options: serde_json::to_value(options).unwrap_or(Value::Null),
                input_digests: BTreeMap::new(),
                seed,
                tool_version: env!("CARGO_PKG_VERSION").to_owned(),
                results: Value::Null,
            },
        }
    }

    fn digest(&mut self, path: &Path) -> CliResult<()> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let d = Sha256::digest(&bytes);
        self.manifest
            .input_digests
            .insert(path.display().to_string(), hex::encode(d));
        Ok(())
    }

    fn finish(self, manifest_path: Option<PathBuf>) -> CliResult<()> {
        let text = crate::formats::to_canonical_json(&self.manifest);
        match manifest_path {
            Some(p) => write_output(&p, &text),
            None => {
                eprint!("{text}");
                Ok(())
            }
        }
    }
}

fn is_stdout(p: &Path) -> bool {
    p.as_os_str() == "-"
}

fn write_output(path: &Path, text: &str) -> CliResult<()> {
    if is_stdout(path) {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CliError::Internal(format!("writing stdout: {e}")));
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::Internal(format!("{}: {e}", path.display())))
}

fn manifest_for(out: &Path) -> Option<PathBuf> {
    if is_stdout(out) {
        return None;
    }
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    Some(PathBuf::from(s))
}

fn prefixed(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn decode(args: DecodeArgs) -> CliResult<()> {
    let mut run = Run::new("decode", &args, None);
    let (header, tensor) = load_tensor(&args.tensor)?;
    run.digest(&args.tensor)?;
    run.digest(&args.tensor.parent().unwrap_or(Path::new(".")).join(&header.data))?;
    let anchors = load_anchors(&args.anchors)?;
    run.digest(&args.anchors)?;
    let config = DecodeConfig {
        anchors,
        score_threshold: args.score_threshold,
        nms_iou: args.nms_iou,
    };
    let boxes = decode_tensor(&tensor, &config)?;
    let id = args
        .tensor
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    run.manifest.results = json!({ "detections": boxes.len() });
    let file = DetectionFile {
        images: vec![ImageDetections { id, detections: boxes }],
    };
    write_output(&args.out, &crate::formats::to_canonical_json(&file))?;
    run.finish(manifest_for(&args.out))
}

fn cluster(args: ClusterArgs) -> CliResult<()> {
    let mut run = Run::new("cluster-anchors", &args, Some(args.seed));
    let ann = AnnotationFile::load(&args.annotations)?;
    run.digest(&args.annotations)?;
    let dims = ann.dims();
    let result = kmeans_iou(&dims, args.k, args.seed, args.restarts)?;
    let mut results = json!({
        "k": args.k,
        "mean_iou": result.mean_iou,
        "iterations": result.iterations,
        "winning_seed": result.seed,
    });
    if let Some((a, b)) = args.sweep {
        let rows = sweep_k(&dims, a..=b, args.seed, args.restarts)?;
        let sweep_path = args.out.with_extension("sweep.csv");
        write_output(&sweep_path, &report::sweep_csv(&rows))?;
        results["sweep"] = json!(sweep_path.display().to_string());
    }
    run.manifest.results = results;
    if is_stdout(&args.out) {
        write_output(&args.out, &crate::formats::anchors_to_csv(&result.anchors))?;
    } else {
        save_anchors(&args.out, &result.anchors).map_err(|e| CliError::Internal(e.to_string()))?;
    }
    run.finish(manifest_for(&args.out))
}

fn loss(args: LossArgs) -> CliResult<()> {
    let mut run = Run::new("loss", &args, None);
    let (header, tensor) = load_tensor(&args.tensor)?;
    run.digest(&args.tensor)?;
    run.digest(&args.tensor.parent().unwrap_or(Path::new(".")).join(&header.data))?;
    let anchors = load_anchors(&args.anchors)?;
    run.digest(&args.anchors)?;
    let ann = AnnotationFile::load(&args.annotations)?;
    run.digest(&args.annotations)?;
    let image = match &args.image_id {
        Some(id) => ann.images.iter().find(|i| &i.id == id),
        None => ann.images.first(),
    }
    .ok_or_else(|| Error::Input("no matching annotated image".into()))?;
    if image.width as f64 != tensor.image_w || image.height as f64 != tensor.image_h {
        return Err(Error::Input(format!(
            "annotation image {}x{} does not match tensor image {}x{}",
            image.width, image.height, tensor.image_w, tensor.image_h
        ))
        .into());
    }
    let truths: Vec<_> = image.boxes.iter().map(|b| b.to_truth()).collect();
    let weights = LossWeights {
        lambda_coord: args.lambda_coord,
        lambda_noobj: args.lambda_noobj,
    };
    let breakdown = compute_loss(&tensor, &anchors, &truths, weights)?;
    run.manifest.results = json!({ "total": breakdown.total });
    write_output(&args.out, &crate::formats::to_canonical_json(&breakdown))?;
    run.finish(manifest_for(&args.out))
}

fn evaluate_detector(args: EvalDetectorArgs) -> CliResult<()> {
    let mut run = Run::new("evaluate-detector", &args, None);
    if !(0.0..=1.0).contains(&args.iou) {
        return Err(Error::Input(format!("--iou must lie in [0,1], got {}", args.iou)).into());
    }
    let dets = DetectionFile::load(&args.detections)?;
    run.digest(&args.detections)?;
    let ann = AnnotationFile::load(&args.ground_truth)?;
    run.digest(&args.ground_truth)?;

    let truths = ann.truths();
    let aligned = dets.aligned_to(&ann);
    let curves = evaluate_by_class(&aligned, &truths, args.iou);
    let matched = match_detections(&aligned, &truths, args.iou);
    let ranked: Vec<Vec<MatchedDetection>> = curves
        .iter()
        .map(|(c, _)| matched.iter().filter(|m| m.class_id == *c).copied().collect())
        .collect();
    let just_curves: Vec<_> = curves.iter().map(|(_, c)| c.clone()).collect();
    let map = mean_average_precision(&just_curves).unwrap_or(0.0);

    write_output(
        &prefixed(&args.out_prefix, "pr.csv"),
        &report::pr_points_csv(&curves, &ranked),
    )?;
    let summary = json!({
        "iou_threshold": args.iou,
        "map": map,
        "classes": curves.iter().map(|(c, k)| json!({
            "class_id": c,
            "ap": k.ap,
            "num_truths": k.num_truths,
            "num_detections": k.num_detections,
            "undefined": k.undefined,
        })).collect::<Vec<_>>(),
    });
    write_output(
        &prefixed(&args.out_prefix, "summary.json"),
        &crate::formats::to_canonical_json(&summary),
    )?;
    if args.svg {
        for (c, k) in &curves {
            let pts: Vec<(f64, f64)> = k.points.iter().map(|p| (p.recall, p.precision)).collect();
            let svg = report::line_plot_svg(
                &format!("Precision-recall, class {c} (AP {:.4})", k.ap),
                "recall",
                "precision",
                &pts,
            );
            write_output(&prefixed(&args.out_prefix, &format!("pr_class{c}.svg")), &svg)?;
        }
    }
    run.manifest.results = summary;
    run.finish(Some(prefixed(&args.out_prefix, "manifest.json")))
}

fn evaluate_classifier(args: EvalClassifierArgs) -> CliResult<()> {
    let mut run = Run::new("evaluate-classifier", &args, None);
    let preds = LabelFile::load(&args.predictions)?;
    run.digest(&args.predictions)?;
    let truth = LabelFile::load(&args.labels)?;
    run.digest(&args.labels)?;
    if preds.classes != truth.classes {
        return Err(Error::Input("prediction and label files list different classes".into()).into());
    }
    let m = confusion(&preds.labels, &truth.labels, &truth.classes)?;
    let acc = accuracy(&m)?;
    run.manifest.results = json!({
        "accuracy": acc,
        "samples": m.total(),
        "zero_support": m.zero_support.iter().map(|&i| m.classes[i].clone()).collect::<Vec<_>>(),
    });
    write_output(&args.out, &report::confusion_csv(&m))?;
    run.finish(manifest_for(&args.out))
}

struct Fused {
    inventory: InventoryFile,
    located: Vec<crate::formats::LocatedComponent>,
    assessment: BuildingAssessment,
}

fn fuse_inventory(run: &mut Run, path: &Path, det_threshold: f64, collapse_threshold: f64) -> CliResult<Fused> {
    let inventory = InventoryFile::load(path)?;
    run.digest(path)?;
    for p in inventory.detection_paths(path) {
        run.digest(&p)?;
    }
    let located = inventory.component_inputs(path)?;
    let inputs: Vec<_> = located.iter().map(|l| l.input.clone()).collect();
    let assessment = assess_building(
        inventory.building.collapse_probability,
        collapse_threshold,
        det_threshold,
        &inputs,
    )?;
    Ok(Fused {
        inventory,
        located,
        assessment,
    })
}

fn state_counts_json(a: &BuildingAssessment) -> Value {
    let c = a.state_counts();
    json!({ "DS0": c[0], "DS1": c[1], "DS2": c[2], "DS3": c[3] })
}

fn fuse(args: FuseArgs) -> CliResult<()> {
    let mut run = Run::new("fuse", &args, None);
    let f = fuse_inventory(&mut run, &args.inventory, args.det_threshold, args.collapse_threshold)?;
    let groups: Vec<(usize, &str)> = f
        .located
        .iter()
        .map(|l| (l.group, f.inventory.groups[l.group].fragility_id.as_str()))
        .collect();
    run.manifest.results = json!({
        "collapsed": f.assessment.collapsed,
        "state_counts": state_counts_json(&f.assessment),
    });
    write_output(&args.out, &report::fused_states_csv(&f.assessment, &groups))?;
    run.finish(manifest_for(&args.out))
}

fn estimate_cost(args: CostArgs) -> CliResult<()> {
    let mut run = Run::new("estimate-cost", &args, Some(args.seed));
    let f = fuse_inventory(&mut run, &args.inventory, args.det_threshold, args.collapse_threshold)?;
    let frag = FragilityFile::load(&args.fragility)?;
    run.digest(&args.fragility)?;
    let db = frag.database()?;

    let groups = f.inventory.performance_groups(&f.located, &f.assessment);
    let options = SimulationOptions {
        realizations: args.realizations,
        seed: args.seed,
        costs_are_means: args.costs_are_means,
    };
    let replacement = f.assessment.collapsed.then_some(f.inventory.building.replacement_cost);
    let curve = simulate_total(&groups, &db, &options, replacement)?;

    let summary = json!({
        "collapsed": f.assessment.collapsed,
        "state_counts": state_counts_json(&f.assessment),
        "realizations": curve.realizations.len(),
        "seed": curve.seed,
        "median": quantile(&curve, 0.5)?,
        "p10": quantile(&curve, 0.1)?,
        "p90": quantile(&curve, 0.9)?,
        "mean": curve.realizations.iter().sum::<f64>() / curve.realizations.len() as f64,
        "fitted_median": curve.fitted_median,
        "fitted_dispersion": curve.fitted_dispersion,
        "costs_are_means": args.costs_are_means,
    });
    write_output(&prefixed(&args.out_prefix, "cdf.csv"), &report::cdf_csv(&curve))?;
    write_output(
        &prefixed(&args.out_prefix, "summary.json"),
        &crate::formats::to_canonical_json(&summary),
    )?;
    if args.svg {
        let pts: Vec<(f64, f64)> = curve.cdf().collect();
        let svg = report::line_plot_svg("Total repair cost", "cost (USD)", "probability of non-exceedance", &pts);
        write_output(&prefixed(&args.out_prefix, "loss_curve.svg"), &svg)?;
    }
    run.manifest.results = summary;
    run.finish(Some(prefixed(&args.out_prefix, "manifest.json")))
}

pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Decode(a) => decode(a),
        Command::ClusterAnchors(a) => cluster(a),
        Command::Loss(a) => loss(a),
        Command::EvaluateDetector(a) => evaluate_detector(a),
        Command::EvaluateClassifier(a) => evaluate_classifier(a),
        Command::Fuse(a) => fuse(a),
        Command::EstimateCost(a) => estimate_cost(a),
    }
}

/// Parse `args` (including the program name) and run, returning the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match std::panic::catch_unwind(|| execute(cli)) {
        Ok(Ok(())) => EXIT_OK,
        Ok(Err(CliError::Input(e))) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
        Ok(Err(CliError::Internal(msg))) => {
            eprintln!("internal error: {msg}");
            EXIT_INTERNAL
        }
        Err(_) => EXIT_INTERNAL,
    }
}
