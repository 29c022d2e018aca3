//! Training losses: heat-map focal loss, masked theta L1, the line-IoU
//! family (LIoU and its gap-penalized generalization) with an analytic
//! gradient, classification focal loss, and the weighted total.
//!
//! Lane pairs are compared per slice after extending each point to a
//! segment `[x - e, x + e]`; `overlap = 2e - |dx|` (signed) and
//! `union = 2e + |dx|` per slice, summed before the ratio.

pub mod gradcheck;

use crate::geometry::Lane;
use crate::targets::TargetMaps;

/// Errors from loss evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum LossError {
    ShapeMismatch {
        left: usize,
        right: usize,
    },
    /// The two lanes share no present slice.
    NoOverlapSlices,
    NonFinite {
        what: &'static str,
        value: f64,
    },
}

impl std::fmt::Display for LossError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LossError::ShapeMismatch { left, right } => {
                write!(f, "shape mismatch: {left} vs {right}")
            }
            LossError::NoOverlapSlices => write!(f, "lanes share no present slice"),
            LossError::NonFinite { what, value } => {
                write!(f, "non-finite {what}: {value}")
            }
        }
    }
}

impl std::error::Error for LossError {}

/// Exponents of the heat-map focal loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        FocalParams {
            alpha: 2.0,
            beta: 4.0,
        }
    }
}

/// Segment extension radius, in pixels, for the line-IoU family.
/// Must be positive; a point becomes the segment `[x - e, x + e]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GliouParams {
    pub e: f64,
}

/// Component weights of the total loss.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub w_reg: f64,
    pub w_cls: f64,
    pub w_hm: f64,
    pub w_theta: f64,
}

/// Scalar loss components fed to [`total_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub reg: f64,
    pub cls: f64,
    pub hm: f64,
    pub theta: f64,
}

/// Penalized focal loss over the start-point heat map, averaged over all
/// cells. Cells with `gt = 1` use `(1-pred)^alpha * log(pred)`; the rest
/// use `(1-gt)^beta * pred^alpha * log(1-pred)`. Caller clamps `pred`
/// strictly inside (0, 1).
pub fn heatmap_focal_loss(pred: &[f64], gt: &[f64], p: &FocalParams) -> Result<f64, LossError> {
    if pred.len() != gt.len() {
        return Err(LossError::ShapeMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    let mut sum = 0.0;
    for (&pr, &g) in pred.iter().zip(gt) {
        sum += if g == 1.0 {
            (1.0 - pr).powf(p.alpha) * pr.ln()
        } else {
            (1.0 - g).powf(p.beta) * pr.powf(p.alpha) * (1.0 - pr).ln()
        };
    }
    Ok(-sum / pred.len() as f64)
}

/// Mean absolute theta error over cells carrying theta supervision
/// (`valid_mask` true); 0 when the mask is empty.
pub fn theta_l1_loss(pred: &[f64], gt: &TargetMaps) -> Result<f64, LossError> {
    if pred.len() != gt.theta_map.len() {
        return Err(LossError::ShapeMismatch {
            left: pred.len(),
            right: gt.theta_map.len(),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (i, &p) in pred.iter().enumerate() {
        if gt.valid_mask[i] {
            sum += (p - gt.theta_map[i]).abs();
            count += 1;
        }
    }
    if count == 0 {
        Ok(0.0)
    } else {
        Ok(sum / count as f64)
    }
}

/// Unmasked variant of [`theta_l1_loss`]: mean absolute error over the whole
/// grid, counting the zero cells outside the supervision region. Kept for
/// comparison; the masked form is the one used in training.
pub fn theta_l1_loss_unmasked(pred: &[f64], gt: &TargetMaps) -> Result<f64, LossError> {
    if pred.len() != gt.theta_map.len() {
        return Err(LossError::ShapeMismatch {
            left: pred.len(),
            right: gt.theta_map.len(),
        });
    }
    let sum: f64 = pred
        .iter()
        .zip(&gt.theta_map)
        .map(|(&p, &g)| (p - g).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Per-slice building blocks shared by the line-IoU family. `penalty` is
/// the gap term `max(union - 4e, 0)`, exactly 0.0 whenever the extended
/// segments overlap, which keeps the degenerate case bit-identical.
#[inline]
fn slice_terms(dx: f64, e: f64) -> (f64, f64, f64) {
    let adx = dx.abs();
    let overlap = 2.0 * e - adx;
    let union = 2.0 * e + adx;
    let penalty = (union - 4.0 * e).max(0.0);
    (overlap, union, penalty)
}

fn joint_deltas(pred: &Lane, gt: &Lane) -> Result<Vec<(usize, f64)>, LossError> {
    if pred.len() != gt.len() {
        return Err(LossError::ShapeMismatch {
            left: pred.len(),
            right: gt.len(),
        });
    }
    let joint: Vec<(usize, f64)> = (0..pred.len())
        .filter_map(|i| match (pred.get(i), gt.get(i)) {
            (Some(px), Some(gx)) => Some((i, px - gx)),
            _ => None,
        })
        .collect();
    if joint.is_empty() {
        return Err(LossError::NoOverlapSlices);
    }
    Ok(joint)
}

/// Line IoU over jointly present slices: `sum(2e - |dx|) / sum(2e + |dx|)`.
/// Signed overlap makes the value go negative once segments separate;
/// range (-1, 1], with 1 iff the lanes agree on every joint slice.
pub fn liou(pred: &Lane, gt: &Lane, p: &GliouParams) -> Result<f64, LossError> {
    let joint = joint_deltas(pred, gt)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(_, dx) in &joint {
        let (overlap, union, _) = slice_terms(dx, p.e);
        num += overlap;
        den += union;
    }
    Ok(num / den)
}

/// Gap-penalized line IoU: `sum(overlap - penalty) / sum(union)` with
/// `penalty = max(union - 4e, 0)`. Equal to [`liou`] bit-for-bit whenever
/// every `|dx| <= 2e`; range (-2, 1].
pub fn gliou(pred: &Lane, gt: &Lane, p: &GliouParams) -> Result<f64, LossError> {
    let joint = joint_deltas(pred, gt)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(_, dx) in &joint {
        let (overlap, union, penalty) = slice_terms(dx, p.e);
        num += overlap - penalty;
        den += union;
    }
    Ok(num / den)
}

/// Regression loss `1 - gliou` and its exact gradient w.r.t. each predicted
/// x. The gradient vector has one entry per slice of `pred`; slices that are
/// absent in either lane get 0.
///
/// Per joint slice, `d loss / d x_i = s_i * ((1 + g_i) * D + N) / D^2`
/// where `s_i = sign(dx_i)`, `g_i = [|dx_i| >= 2e]`, and N, D are the
/// summed numerator and denominator. Kink convention: `sign(0) = 0` (zero
/// subgradient at agreement) and the penalty indicator turns on at
/// `|dx| = 2e` (right-continuous there).
pub fn gliou_loss_and_grad(
    pred: &Lane,
    gt: &Lane,
    p: &GliouParams,
) -> Result<(f64, Vec<f64>), LossError> {
    let joint = joint_deltas(pred, gt)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for &(_, dx) in &joint {
        let (overlap, union, penalty) = slice_terms(dx, p.e);
        num += overlap - penalty;
        den += union;
    }
    let loss = 1.0 - num / den;

    let mut grad = vec![0.0; pred.len()];
    for &(i, dx) in &joint {
        let s = if dx > 0.0 {
            1.0
        } else if dx < 0.0 {
            -1.0
        } else {
            0.0
        };
        let g = if dx.abs() >= 2.0 * p.e { 1.0 } else { 0.0 };
        grad[i] = s * ((1.0 + g) * den + num) / (den * den);
    }
    Ok((loss, grad))
}

/// Binary focal loss over proposal scores, averaged over proposals.
/// Positives weigh `alpha_bal * (1-p)^gamma * -log(p)`; negatives weigh
/// `(1 - alpha_bal) * p^gamma * -log(1-p)`. Scores strictly in (0, 1).
pub fn cls_focal_loss(
    scores: &[f64],
    labels: &[bool],
    gamma: f64,
    alpha_bal: f64,
) -> Result<f64, LossError> {
    if scores.len() != labels.len() {
        return Err(LossError::ShapeMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    if scores.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (&p, &pos) in scores.iter().zip(labels) {
        sum += if pos {
            -alpha_bal * (1.0 - p).powf(gamma) * p.ln()
        } else {
            -(1.0 - alpha_bal) * p.powf(gamma) * (1.0 - p).ln()
        };
    }
    Ok(sum / scores.len() as f64)
}

/// Weighted sum of the four loss components.
pub fn total_loss(parts: &LossParts, w: &LossWeights) -> Result<f64, LossError> {
    for (what, value) in [
        ("reg part", parts.reg),
        ("cls part", parts.cls),
        ("hm part", parts.hm),
        ("theta part", parts.theta),
    ] {
        if !value.is_finite() {
            return Err(LossError::NonFinite { what, value });
        }
    }
    Ok(w.w_reg * parts.reg + w.w_cls * parts.cls + w.w_hm * parts.hm + w.w_theta * parts.theta)
}
