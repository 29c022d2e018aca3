//! Benchmark metrics: rasterized-IoU F1 and point-tolerance accuracy.
//!
//! The F1 path rasterizes each lane as a thick polyline on a full-resolution
//! binary canvas, matches predictions to ground truth per image with the
//! Hungarian algorithm on negated IoUs, and discards matched pairs below the
//! IoU threshold. The accuracy path compares per-slice x-coordinates under a
//! pixel tolerance and scores lanes by their correct-point fraction.

mod hungarian;

pub use hungarian::min_cost_assignment;

use crate::geometry::{Lane, SliceScheme};
use rayon::prelude::*;
use serde::Serialize;

/// Errors from metric evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// The lane has no present slice to rasterize.
    EmptyLane,
}

impl std::fmt::Display for MetricsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricsError::EmptyLane => write!(f, "lane has no present slice"),
        }
    }
}

impl std::error::Error for MetricsError {}

/// Aggregated evaluation counts and ratios. `acc`/`fpr`/`fnr` are only
/// populated by the point-tolerance evaluator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fnr: Option<f64>,
}

impl EvalReport {
    /// Builds precision/recall/F1 from raw counts. All-zero counts report
    /// the vacuous perfect score; otherwise empty denominators give 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let (precision, recall) = if tp == 0 && fp == 0 && fn_ == 0 {
            (1.0, 1.0)
        } else {
            let p = if tp + fp > 0 {
                tp as f64 / (tp + fp) as f64
            } else {
                0.0
            };
            let r = if tp + fn_ > 0 {
                tp as f64 / (tp + fn_) as f64
            } else {
                0.0
            };
            (p, r)
        };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        EvalReport {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            acc: None,
            fpr: None,
            fnr: None,
        }
    }
}

/// Binary canvas raster of a lane as a `width_px`-thick polyline. Rows
/// between consecutive present slices are filled with a centered run of
/// pixels, rounding half up at both run ends; everything is clipped to the
/// canvas. Empty lanes produce an empty raster.
fn rasterize(lane: &Lane, width_px: f64, s: &SliceScheme) -> Vec<bool> {
    let w = s.image_w as usize;
    let h = s.image_h as usize;
    let mut px = vec![false; w * h];
    let half = width_px / 2.0;
    let pts: Vec<(f64, f64)> = lane.iter_present().map(|(i, x)| (x, s.ys[i])).collect();

    let mut fill_row = |row: i64, cx: f64| {
        if row < 0 || row >= h as i64 {
            return;
        }
        let lo = ((cx - half).round() as i64).max(0);
        let hi = ((cx + half).round() as i64).min(w as i64 - 1);
        for col in lo..=hi {
            px[row as usize * w + col as usize] = true;
        }
    };

    match pts.len() {
        0 => {}
        1 => fill_row(pts[0].1.round() as i64, pts[0].0),
        _ => {
            // Slice ys decrease along the lane, so each segment spans rows
            // [y1, y0] with y1 < y0.
            for seg in pts.windows(2) {
                let (x0, y0) = seg[0];
                let (x1, y1) = seg[1];
                let top = y1.ceil() as i64;
                let bottom = y0.floor() as i64;
                for row in top..=bottom {
                    let t = (row as f64 - y0) / (y1 - y0);
                    fill_row(row, x0 + t * (x1 - x0));
                }
            }
        }
    }
    px
}

fn raster_iou(a: &[bool], b: &[bool]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&pa, &pb) in a.iter().zip(b) {
        if pa && pb {
            inter += 1;
        }
        if pa || pb {
            union += 1;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// IoU of two lanes rasterized as `width_px`-thick polylines at canvas
/// resolution. Lanes entirely off-canvas rasterize empty and score 0.
pub fn lane_iou_raster(
    a: &Lane,
    b: &Lane,
    width_px: f64,
    canvas: &SliceScheme,
) -> Result<f64, MetricsError> {
    if a.present_count() == 0 || b.present_count() == 0 {
        return Err(MetricsError::EmptyLane);
    }
    Ok(raster_iou(
        &rasterize(a, width_px, canvas),
        &rasterize(b, width_px, canvas),
    ))
}

/// F1 evaluation over aligned per-image lane lists: Hungarian matching on
/// negated raster IoUs, pairs at or above `iou_thresh` are true positives.
/// Images contribute counts independently; a both-empty image is neutral.
///
/// Panics if the image lists differ in length (they must be aligned).
pub fn culane_f1(
    preds: &[Vec<Lane>],
    gts: &[Vec<Lane>],
    iou_thresh: f64,
    width_px: f64,
    canvas: &SliceScheme,
) -> EvalReport {
    assert_eq!(preds.len(), gts.len(), "pred/gt image lists must align");
    let counts: Vec<(usize, usize, usize)> = preds
        .par_iter()
        .zip(gts.par_iter())
        .map(|(pred_lanes, gt_lanes)| {
            let pr: Vec<Vec<bool>> = pred_lanes
                .iter()
                .map(|l| rasterize(l, width_px, canvas))
                .collect();
            let gr: Vec<Vec<bool>> = gt_lanes
                .iter()
                .map(|l| rasterize(l, width_px, canvas))
                .collect();
            let iou: Vec<Vec<f64>> = pr
                .iter()
                .map(|p| gr.iter().map(|g| raster_iou(p, g)).collect())
                .collect();
            let cost: Vec<Vec<f64>> = iou
                .iter()
                .map(|row| row.iter().map(|v| -v).collect())
                .collect();
            let assignment = min_cost_assignment(&cost);
            let tp = assignment
                .iter()
                .enumerate()
                .filter(|(pi, gi)| gi.is_some_and(|gi| iou[*pi][gi] >= iou_thresh))
                .count();
            (tp, pred_lanes.len() - tp, gt_lanes.len() - tp)
        })
        .collect();

    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (t, f, n) in counts {
        tp += t;
        fp += f;
        fn_ += n;
    }
    EvalReport::from_counts(tp, fp, fn_)
}

/// Correct-point count of `pred` against `gt`: slices where the ground
/// truth is present and the prediction lands strictly within `pt_tol`
/// pixels. Returns (correct, gt present total).
fn point_matches(pred: &Lane, gt: &Lane, pt_tol: f64) -> (usize, usize) {
    let mut correct = 0;
    let mut total = 0;
    for i in 0..gt.len() {
        if let Some(gx) = gt.get(i) {
            total += 1;
            if let Some(px) = pred.get(i) {
                if (px - gx).abs() < pt_tol {
                    correct += 1;
                }
            }
        }
    }
    (correct, total)
}

fn frac(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Point-tolerance evaluation over aligned per-image lane lists, sampled on
/// shared slice rows.
///
/// A prediction is correct when its correct-point fraction against its
/// best-matching ground truth exceeds `lane_tol`; accuracy is the global
/// ratio of best-covered ground-truth points. `fpr` is the share of
/// incorrect predictions, `fnr` the share of ground truths no prediction
/// covers. Panics if the image lists differ in length.
pub fn tusimple_eval(
    preds: &[Vec<Lane>],
    gts: &[Vec<Lane>],
    pt_tol: f64,
    lane_tol: f64,
) -> EvalReport {
    assert_eq!(preds.len(), gts.len(), "pred/gt image lists must align");
    let mut correct_points = 0usize;
    let mut total_points = 0usize;
    let mut n_pred = 0usize;
    let mut false_preds = 0usize;
    let mut n_gt = 0usize;
    let mut missed_gts = 0usize;

    for (pred_lanes, gt_lanes) in preds.iter().zip(gts) {
        n_pred += pred_lanes.len();
        n_gt += gt_lanes.len();

        for p in pred_lanes {
            let best = gt_lanes
                .iter()
                .map(|g| {
                    let (c, t) = point_matches(p, g, pt_tol);
                    frac(c, t)
                })
                .fold(0.0, f64::max);
            if best <= lane_tol {
                false_preds += 1;
            }
        }

        for g in gt_lanes {
            let mut best_correct = 0usize;
            let mut total = 0usize;
            let mut covered = false;
            for p in pred_lanes {
                let (c, t) = point_matches(p, g, pt_tol);
                total = t;
                best_correct = best_correct.max(c);
                if frac(c, t) > lane_tol {
                    covered = true;
                }
            }
            if pred_lanes.is_empty() {
                total = g.present_count();
            }
            correct_points += best_correct;
            total_points += total;
            if !covered {
                missed_gts += 1;
            }
        }
    }

    let mut report = EvalReport::from_counts(n_pred - false_preds, false_preds, missed_gts);
    report.acc = Some(if total_points == 0 {
        1.0
    } else {
        correct_points as f64 / total_points as f64
    });
    report.fpr = Some(if n_pred == 0 {
        0.0
    } else {
        false_preds as f64 / n_pred as f64
    });
    report.fnr = Some(if n_gt == 0 {
        0.0
    } else {
        missed_gts as f64 / n_gt as f64
    });
    report
}

/// Index-aligned variant of [`tusimple_eval`]: prediction `i` is compared
/// only against ground truth `i`. Spare predictions count false, spare
/// ground truths count missed.
pub fn tusimple_eval_indexed(
    preds: &[Vec<Lane>],
    gts: &[Vec<Lane>],
    pt_tol: f64,
    lane_tol: f64,
) -> EvalReport {
    assert_eq!(preds.len(), gts.len(), "pred/gt image lists must align");
    let mut correct_points = 0usize;
    let mut total_points = 0usize;
    let mut n_pred = 0usize;
    let mut false_preds = 0usize;
    let mut n_gt = 0usize;
    let mut missed_gts = 0usize;

    for (pred_lanes, gt_lanes) in preds.iter().zip(gts) {
        n_pred += pred_lanes.len();
        n_gt += gt_lanes.len();
        for (i, g) in gt_lanes.iter().enumerate() {
            let (c, t) = match pred_lanes.get(i) {
                Some(p) => point_matches(p, g, pt_tol),
                None => (0, g.present_count()),
            };
            correct_points += c;
            total_points += t;
            if frac(c, t) <= lane_tol {
                missed_gts += 1;
                if pred_lanes.get(i).is_some() {
                    false_preds += 1;
                }
            }
        }
        if pred_lanes.len() > gt_lanes.len() {
            false_preds += pred_lanes.len() - gt_lanes.len();
        }
    }

    let mut report = EvalReport::from_counts(n_pred - false_preds, false_preds, missed_gts);
    report.acc = Some(if total_points == 0 {
        1.0
    } else {
        correct_points as f64 / total_points as f64
    });
    report.fpr = Some(if n_pred == 0 {
        0.0
    } else {
        false_preds as f64 / n_pred as f64
    });
    report.fnr = Some(if n_gt == 0 {
        0.0
    } else {
        missed_gts as f64 / n_gt as f64
    });
    report
}
