//! Lane and anchor representations on a fixed vertical slicing scheme.
//!
//! Coordinate frame: origin at the top-left of the image, y grows downward.
//! Slices are indexed bottom-to-top, so `ys[0]` is the bottom row of the
//! image and slice y-coordinates are strictly decreasing.

use std::f64::consts::PI;

/// Anchors with `|tan((1 - theta) * pi)|` below this are treated as
/// degenerate (near-horizontal rays).
pub const DEGENERATE_TAN_EPS: f64 = 1e-9;

/// Errors from lane/anchor geometry operations.
#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    /// The anchor ray is near-horizontal and cannot be sampled per slice.
    DegenerateAnchor { theta: f64 },
    /// Not enough points to perform the operation.
    TooFewPoints { got: usize, required: usize },
    /// A slicing scheme violated its structural invariants.
    InvalidScheme { reason: String },
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryError::DegenerateAnchor { theta } => {
                write!(
                    f,
                    "degenerate anchor: theta {theta} yields a near-horizontal ray"
                )
            }
            GeometryError::TooFewPoints { got, required } => {
                write!(f, "too few points: got {got}, need {required}")
            }
            GeometryError::InvalidScheme { reason } => {
                write!(f, "invalid slice scheme: {reason}")
            }
        }
    }
}

impl std::error::Error for GeometryError {}

/// Fixed set of horizontal slicing lines on which lanes are sampled.
///
/// `ys` holds one pixel y-coordinate per slice, ordered bottom-to-top
/// (strictly decreasing), with `ys[0] = image_h - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceScheme {
    pub image_w: u32,
    pub image_h: u32,
    pub ys: Vec<f64>,
}

impl SliceScheme {
    /// Equidistant scheme with `k` slices spanning the full image height,
    /// from the bottom row `image_h - 1` up to row 0.
    pub fn uniform(k: usize, image_w: u32, image_h: u32) -> Result<Self, GeometryError> {
        if k < 2 {
            return Err(GeometryError::InvalidScheme {
                reason: format!("need at least 2 slices, got {k}"),
            });
        }
        let bottom = (image_h - 1) as f64;
        let ys = (0..k)
            .map(|i| bottom * (k - 1 - i) as f64 / (k - 1) as f64)
            .collect();
        Self::with_ys(image_w, image_h, ys)
    }

    /// Scheme with explicit slice y-coordinates. Validates ordering and the
    /// bottom anchor `ys[0] = image_h - 1`; spacing is not required to be
    /// uniform.
    pub fn with_ys(image_w: u32, image_h: u32, ys: Vec<f64>) -> Result<Self, GeometryError> {
        if ys.len() < 2 {
            return Err(GeometryError::InvalidScheme {
                reason: format!("need at least 2 slices, got {}", ys.len()),
            });
        }
        let bottom = (image_h - 1) as f64;
        if (ys[0] - bottom).abs() > 1e-9 {
            return Err(GeometryError::InvalidScheme {
                reason: format!("ys[0] = {} must equal image_h - 1 = {bottom}", ys[0]),
            });
        }
        for pair in ys.windows(2) {
            if pair[1] >= pair[0] {
                return Err(GeometryError::InvalidScheme {
                    reason: format!(
                        "ys must be strictly decreasing, found {} -> {}",
                        pair[0], pair[1]
                    ),
                });
            }
        }
        if ys.iter().any(|&y| !(0.0..=bottom).contains(&y)) {
            return Err(GeometryError::InvalidScheme {
                reason: "all ys must lie within [0, image_h - 1]".to_string(),
            });
        }
        Ok(SliceScheme {
            image_w,
            image_h,
            ys,
        })
    }

    /// Number of slices.
    pub fn k(&self) -> usize {
        self.ys.len()
    }
}

/// A lane sampled on a slicing scheme: one optional x-coordinate per slice.
/// Present slices always form one contiguous run.
#[derive(Debug, Clone, PartialEq)]
pub struct Lane {
    xs: Vec<Option<f64>>,
}

impl Lane {
    /// Builds a lane from per-slice samples, keeping the longest contiguous
    /// present run (bottom-most on ties) and dropping the rest.
    pub fn new(xs: Vec<Option<f64>>) -> Self {
        let mut best: Option<(usize, usize)> = None; // (start, len)
        let mut run_start = 0usize;
        let mut run_len = 0usize;
        for (i, x) in xs.iter().enumerate() {
            if x.is_some() {
                if run_len == 0 {
                    run_start = i;
                }
                run_len += 1;
                if best.is_none_or(|(_, l)| run_len > l) {
                    best = Some((run_start, run_len));
                }
            } else {
                run_len = 0;
            }
        }
        let mut xs = xs;
        if let Some((start, len)) = best {
            for (i, x) in xs.iter_mut().enumerate() {
                if i < start || i >= start + len {
                    *x = None;
                }
            }
        }
        Lane { xs }
    }

    /// Lane present on every slice.
    pub fn full(xs: Vec<f64>) -> Self {
        Lane {
            xs: xs.into_iter().map(Some).collect(),
        }
    }

    /// Lane absent on every slice.
    pub fn empty(k: usize) -> Self {
        Lane { xs: vec![None; k] }
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// X-coordinate at slice `i`, if the lane exists there.
    pub fn get(&self, i: usize) -> Option<f64> {
        self.xs.get(i).copied().flatten()
    }

    pub fn xs(&self) -> &[Option<f64>] {
        &self.xs
    }

    pub fn present_count(&self) -> usize {
        self.xs.iter().filter(|x| x.is_some()).count()
    }

    /// Inclusive index range of the present run, if any slice is present.
    pub fn present_range(&self) -> Option<(usize, usize)> {
        let first = self.xs.iter().position(|x| x.is_some())?;
        let last = self.xs.iter().rposition(|x| x.is_some())?;
        Some((first, last))
    }

    /// Iterates `(slice index, x)` over present slices, bottom-to-top.
    pub fn iter_present(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.xs
            .iter()
            .enumerate()
            .filter_map(|(i, x)| x.map(|v| (i, v)))
    }
}

/// A lane anchor: normalized start point plus normalized ray angle.
///
/// `theta = 0.5` is a vertical ray; values toward 0 or 1 tilt the ray toward
/// horizontal and become degenerate at the open endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub s_x: f64,
    pub s_y: f64,
    pub theta: f64,
}

impl Anchor {
    pub fn new(s_x: f64, s_y: f64, theta: f64) -> Self {
        Anchor { s_x, s_y, theta }
    }
}

/// Samples the anchor ray on the slice scheme.
///
/// Present slices are those at or above the start point (`y_i <= s_y * h`)
/// whose x stays within one image width of the image (`[-w, 2w]`); the run is
/// truncated at the first slice that drifts outside that margin. A `theta` of
/// exactly 0.5 produces the exact vertical line `x = s_x * w`.
pub fn anchor_to_lane(a: &Anchor, s: &SliceScheme) -> Result<Lane, GeometryError> {
    let w = s.image_w as f64;
    let h = s.image_h as f64;
    let slope = if a.theta == 0.5 {
        0.0
    } else {
        let tan = ((1.0 - a.theta) * PI).tan();
        if tan.abs() < DEGENERATE_TAN_EPS {
            return Err(GeometryError::DegenerateAnchor { theta: a.theta });
        }
        1.0 / tan
    };

    let start_y = a.s_y * h;
    let mut xs = vec![None; s.k()];
    for (i, &y) in s.ys.iter().enumerate() {
        // Tolerance keeps a slice exactly at the start point present even
        // when s_y * h rounds a hair below its y.
        if y > start_y + 1e-6 {
            continue;
        }
        let x = a.s_x * w + (y - start_y) * slope;
        if !(-w..=2.0 * w).contains(&x) {
            break; // x is monotone along the ray; the run ends here
        }
        xs[i] = Some(x);
    }
    Ok(Lane::new(xs))
}

/// Resamples an annotated polyline onto the slice scheme by linear
/// interpolation of x at each slice y. Slices outside the polyline's
/// y-extent are absent.
pub fn resample_polyline(points: &[(f64, f64)], s: &SliceScheme) -> Result<Lane, GeometryError> {
    if points.len() < 2 {
        return Err(GeometryError::TooFewPoints {
            got: points.len(),
            required: 2,
        });
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.1.total_cmp(&b.1));
    let y_min = pts[0].1;
    let y_max = pts[pts.len() - 1].1;

    let mut xs = vec![None; s.k()];
    for (i, &y) in s.ys.iter().enumerate() {
        if y < y_min || y > y_max {
            continue;
        }
        for seg in pts.windows(2) {
            let (x0, y0) = seg[0];
            let (x1, y1) = seg[1];
            if y < y0 || y > y1 {
                continue;
            }
            let dy = y1 - y0;
            let x = if dy.abs() < 1e-12 {
                x0
            } else {
                x0 + (y - y0) / dy * (x1 - x0)
            };
            xs[i] = Some(x);
            break;
        }
    }
    Ok(Lane::new(xs))
}

/// How many bottom-most present points feed the direction fit in
/// [`lane_start_and_theta`].
pub const THETA_FIT_POINTS: usize = 5;

/// Recovers anchor parameters from an annotated lane.
///
/// The start point is the lowest present slice (largest y). The angle comes
/// from a least-squares fit of x against y over the first
/// `min(5, n)` present points, mapped to normalized form via
/// `theta = 1 - angle / pi`.
pub fn lane_start_and_theta(l: &Lane, s: &SliceScheme) -> Result<(f64, f64, f64), GeometryError> {
    let present: Vec<(usize, f64)> = l.iter_present().collect();
    if present.len() < 2 {
        return Err(GeometryError::TooFewPoints {
            got: present.len(),
            required: 2,
        });
    }

    let (start_idx, start_x) = present[0];
    let start_y = s.ys[start_idx];
    let s_x = start_x / s.image_w as f64;
    let s_y = start_y / s.image_h as f64;

    let fit = &present[..present.len().min(THETA_FIT_POINTS)];
    let n = fit.len() as f64;
    let mean_y = fit.iter().map(|&(i, _)| s.ys[i]).sum::<f64>() / n;
    let mean_x = fit.iter().map(|&(_, x)| x).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for &(i, x) in fit {
        let dy = s.ys[i] - mean_y;
        cov += dy * (x - mean_x);
        var += dy * dy;
    }
    // var > 0: slice ys are strictly decreasing, so the fit ys are distinct.
    let slope = cov / var; // dx/dy along the lane
    let angle = 1.0_f64.atan2(slope); // in (0, pi)
    let theta = 1.0 - angle / PI;
    Ok((s_x, s_y, theta))
}
