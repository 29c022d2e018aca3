//! Metric evaluation: walks aligned prediction and ground-truth
//! directories, scores them image by image, and emits a JSON-lines report
//! ending in one aggregate summary record.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use laneforge::config::RunConfig;
use laneforge::dataio::{parse_culane_lines, parse_tusimple_json};
use laneforge::geometry::{resample_polyline, Lane, SliceScheme};
use laneforge::metrics::{culane_f1, tusimple_eval, EvalReport};

use crate::{io_err, CliError};

const IOU_THRESH: f64 = 0.5;
const LANE_WIDTH_PX: f64 = 30.0;
const PT_TOL: f64 = 20.0;
const LANE_TOL: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Rasterized IoU matching at threshold 0.5, 30 px lane width.
    Culane,
    /// Per-point 20 px tolerance with the 85% per-lane rule.
    Tusimple,
}

fn summary_record(report: &EvalReport) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("report is plain data");
    v.as_object_mut()
        .expect("report serializes to an object")
        .insert("summary".into(), serde_json::Value::Bool(true));
    v
}

/// Relative paths of `.lines.txt` files under `root`, sorted.
fn polyline_files(root: &Path) -> Vec<String> {
    let mut rels: Vec<String> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| e.file_name().to_string_lossy().ends_with(".lines.txt"))
        .filter_map(|e| {
            e.path()
                .strip_prefix(root)
                .ok()
                .map(|p| p.to_string_lossy().into_owned())
        })
        .collect();
    rels.sort();
    rels
}

/// Lanes of one polyline file; a missing file is an empty image.
fn load_polyline_lanes(root: &Path, rel: &str, scheme: &SliceScheme) -> Result<Vec<Lane>, String> {
    let path = root.join(rel);
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{rel}: {e}"))?;
    let polylines = parse_culane_lines(&text).map_err(|e| format!("{rel}: {e}"))?;
    let mut lanes = Vec::new();
    for poly in &polylines {
        match resample_polyline(poly, scheme) {
            Ok(l) if l.present_count() > 0 => lanes.push(l),
            // Lanes falling between slices or off canvas score as absent.
            _ => {}
        }
    }
    Ok(lanes)
}

/// All JSON-line records under `root`, keyed by `raw_file`.
fn load_records(root: &Path) -> Result<BTreeMap<String, Vec<Lane>>, Vec<String>> {
    let mut files: Vec<std::path::PathBuf> = walkdir::WalkDir::new(root)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .filter(|e| {
            let n = e.file_name().to_string_lossy().into_owned();
            n.ends_with(".json") || n.ends_with(".jsonl")
        })
        .map(|e| e.into_path())
        .collect();
    files.sort();

    let mut map = BTreeMap::new();
    let mut failures = Vec::new();
    for path in files {
        let rel = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) => {
                failures.push(format!("{rel}: {e}"));
                continue;
            }
        };
        for (li, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match parse_tusimple_json(line) {
                Ok(rec) => {
                    map.insert(rec.raw_file.clone(), rec.to_lanes());
                }
                Err(e) => failures.push(format!("{rel} line {}: {e}", li + 1)),
            }
        }
    }
    if failures.is_empty() {
        Ok(map)
    } else {
        Err(failures)
    }
}

fn eval_culane(
    preds: &Path,
    gts: &Path,
    cfg: &RunConfig,
    rows: &mut Vec<serde_json::Value>,
) -> Result<EvalReport, CliError> {
    let scheme = cfg.scheme().map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rels: Vec<String> = polyline_files(preds);
    for rel in polyline_files(gts) {
        if !rels.contains(&rel) {
            rels.push(rel);
        }
    }
    rels.sort();

    let mut failures = Vec::new();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for rel in &rels {
        let pred = load_polyline_lanes(preds, rel, &scheme);
        let gt = load_polyline_lanes(gts, rel, &scheme);
        let (pred, gt) = match (pred, gt) {
            (Ok(p), Ok(g)) => (p, g),
            (Err(e), _) | (_, Err(e)) => {
                eprintln!("error: {e}");
                failures.push(e);
                continue;
            }
        };
        let r = culane_f1(&[pred], &[gt], IOU_THRESH, LANE_WIDTH_PX, &scheme);
        rows.push(serde_json::json!({
            "file": rel, "tp": r.tp, "fp": r.fp, "fn": r.fn_,
        }));
        tp += r.tp;
        fp += r.fp;
        fn_ += r.fn_;
    }
    if !failures.is_empty() {
        return Err(CliError::Data(format!("{} file(s) failed", failures.len())));
    }
    Ok(EvalReport::from_counts(tp, fp, fn_))
}

fn eval_tusimple(
    preds: &Path,
    gts: &Path,
    rows: &mut Vec<serde_json::Value>,
) -> Result<EvalReport, CliError> {
    let report_failures = |failures: Vec<String>| {
        for f in &failures {
            eprintln!("error: {f}");
        }
        CliError::Data(format!("{} record(s) failed", failures.len()))
    };
    let pred_map = load_records(preds).map_err(report_failures)?;
    let gt_map = load_records(gts).map_err(report_failures)?;

    let mut keys: Vec<&String> = gt_map.keys().chain(pred_map.keys()).collect();
    keys.sort();
    keys.dedup();

    let mut pred_images = Vec::new();
    let mut gt_images = Vec::new();
    for key in keys {
        let pred = pred_map.get(key).cloned().unwrap_or_default();
        let gt = gt_map.get(key).cloned().unwrap_or_default();
        let r = tusimple_eval(
            std::slice::from_ref(&pred),
            std::slice::from_ref(&gt),
            PT_TOL,
            LANE_TOL,
        );
        rows.push(serde_json::json!({
            "file": key, "tp": r.tp, "fp": r.fp, "fn": r.fn_, "acc": r.acc,
        }));
        pred_images.push(pred);
        gt_images.push(gt);
    }
    // Aggregate in one pass so accuracy stays point-weighted across images.
    Ok(tusimple_eval(&pred_images, &gt_images, PT_TOL, LANE_TOL))
}

pub fn run(
    preds: &Path,
    gts: &Path,
    mode: EvalMode,
    out: Option<&Path>,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    if !gts.is_dir() {
        return Err(CliError::Usage(format!(
            "ground-truth directory {} does not exist",
            gts.display()
        )));
    }
    if !preds.is_dir() {
        return Err(CliError::Usage(format!(
            "prediction directory {} does not exist",
            preds.display()
        )));
    }

    let mut rows = Vec::new();
    let summary = match mode {
        EvalMode::Culane => eval_culane(preds, gts, cfg, &mut rows)?,
        EvalMode::Tusimple => eval_tusimple(preds, gts, &mut rows)?,
    };
    rows.push(summary_record(&summary));

    let mut text = String::new();
    for row in &rows {
        text.push_str(&serde_json::to_string(row).expect("rows are plain data"));
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_err("writing report", e))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| io_err("writing report", e))?,
    }
    Ok(())
}
