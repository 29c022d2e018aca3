//! Start-point supervision maps and their inverse decode.
//!
//! A lane anchor is supervised on a downsampled grid as a Gaussian bump in
//! a heat map plus its ray angle in a theta map; decoding turns a predicted
//! pair of maps back into scored anchors. Maps are row-major `Vec<f64>`
//! indexed `y * grid_w + x`.

use crate::geometry::Anchor;

/// Errors from supervision-map generation.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetError {
    /// A start point landed outside the grid after cell quantization.
    OutOfGrid {
        s_x: f64,
        s_y: f64,
        cell: (i64, i64),
    },
    /// Configuration violated its invariants.
    InvalidConfig { reason: String },
}

impl std::fmt::Display for TargetError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TargetError::OutOfGrid { s_x, s_y, cell } => write!(
                f,
                "start point ({s_x}, {s_y}) quantizes to cell {cell:?} outside the grid"
            ),
            TargetError::InvalidConfig { reason } => write!(f, "invalid target config: {reason}"),
        }
    }
}

impl std::error::Error for TargetError {}

/// Hyperparameters for supervision-map generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetConfig {
    /// Gaussian spread in grid cells.
    pub sigma: f64,
    /// Heat threshold above which a cell carries theta supervision.
    pub t_theta: f64,
    /// Integer stride from image pixels to grid cells.
    pub downsample: u32,
}

impl TargetConfig {
    pub fn new(sigma: f64, t_theta: f64, downsample: u32) -> Result<Self, TargetError> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(TargetError::InvalidConfig {
                reason: format!("sigma must be > 0, got {sigma}"),
            });
        }
        if !(t_theta > 0.0 && t_theta < 1.0) {
            return Err(TargetError::InvalidConfig {
                reason: format!("t_theta must lie in (0, 1), got {t_theta}"),
            });
        }
        if downsample == 0 {
            return Err(TargetError::InvalidConfig {
                reason: "downsample must be >= 1".to_string(),
            });
        }
        Ok(TargetConfig {
            sigma,
            t_theta,
            downsample,
        })
    }
}

/// Supervision maps for one image: heat map, theta map, and the mask of
/// cells that carry theta supervision (`valid_mask = hm > t_theta`).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetMaps {
    pub grid_w: usize,
    pub grid_h: usize,
    pub hm: Vec<f64>,
    pub theta_map: Vec<f64>,
    pub valid_mask: Vec<bool>,
}

impl TargetMaps {
    pub fn idx(&self, y: usize, x: usize) -> usize {
        y * self.grid_w + x
    }

    pub fn hm_at(&self, y: usize, x: usize) -> f64 {
        self.hm[self.idx(y, x)]
    }

    pub fn theta_at(&self, y: usize, x: usize) -> f64 {
        self.theta_map[self.idx(y, x)]
    }

    pub fn mask_at(&self, y: usize, x: usize) -> bool {
        self.valid_mask[self.idx(y, x)]
    }
}

/// Grid cell containing a normalized start point. Cell `j` covers
/// `[j/size, (j+1)/size)`, so this is also nearest-cell-center quantization.
fn start_cell(a: &Anchor, grid_h: usize, grid_w: usize) -> Result<(usize, usize), TargetError> {
    let gx = (a.s_x * grid_w as f64).floor() as i64;
    let gy = (a.s_y * grid_h as f64).floor() as i64;
    if gx < 0 || gy < 0 || gx >= grid_w as i64 || gy >= grid_h as i64 {
        return Err(TargetError::OutOfGrid {
            s_x: a.s_x,
            s_y: a.s_y,
            cell: (gx, gy),
        });
    }
    Ok((gy as usize, gx as usize))
}

fn gaussian(dx: f64, dy: f64, sigma: f64) -> f64 {
    (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
}

/// Renders the start-point heat map: one non-normalized Gaussian per anchor,
/// centered on its quantized start cell, combined across anchors by
/// elementwise max. Every start cell peaks at exactly 1.
pub fn make_heatmap(
    starts: &[Anchor],
    cfg: &TargetConfig,
    grid_h: usize,
    grid_w: usize,
) -> Result<Vec<f64>, TargetError> {
    let mut hm = vec![0.0; grid_w * grid_h];
    for a in starts {
        let (cy, cx) = start_cell(a, grid_h, grid_w)?;
        for y in 0..grid_h {
            for x in 0..grid_w {
                let v = gaussian(x as f64 - cx as f64, y as f64 - cy as f64, cfg.sigma);
                let cell = &mut hm[y * grid_w + x];
                if v > *cell {
                    *cell = v;
                }
            }
        }
    }
    Ok(hm)
}

/// Fills the theta map over cells where `hm > t_theta`. A contested cell
/// carries the theta of the anchor whose own Gaussian is largest there
/// (first anchor wins exact ties); everything else is 0 with the mask false.
pub fn make_theta_map(
    starts: &[Anchor],
    hm: &[f64],
    cfg: &TargetConfig,
    grid_h: usize,
    grid_w: usize,
) -> Result<(Vec<f64>, Vec<bool>), TargetError> {
    let cells: Vec<(usize, usize)> = starts
        .iter()
        .map(|a| start_cell(a, grid_h, grid_w))
        .collect::<Result<_, _>>()?;

    let mut theta_map = vec![0.0; grid_w * grid_h];
    let mut valid_mask = vec![false; grid_w * grid_h];
    for y in 0..grid_h {
        for x in 0..grid_w {
            let i = y * grid_w + x;
            if hm[i] <= cfg.t_theta {
                continue;
            }
            valid_mask[i] = true;
            let mut best = f64::NEG_INFINITY;
            for (a, &(cy, cx)) in starts.iter().zip(&cells) {
                let v = gaussian(x as f64 - cx as f64, y as f64 - cy as f64, cfg.sigma);
                if v > best {
                    best = v;
                    theta_map[i] = a.theta;
                }
            }
        }
    }
    Ok((theta_map, valid_mask))
}

/// Heat map, theta map, and mask for one anchor set in a single call.
pub fn make_target_maps(
    starts: &[Anchor],
    cfg: &TargetConfig,
    grid_h: usize,
    grid_w: usize,
) -> Result<TargetMaps, TargetError> {
    let hm = make_heatmap(starts, cfg, grid_h, grid_w)?;
    let (theta_map, valid_mask) = make_theta_map(starts, &hm, cfg, grid_h, grid_w)?;
    Ok(TargetMaps {
        grid_w,
        grid_h,
        hm,
        theta_map,
        valid_mask,
    })
}

/// Decodes predicted maps into at most `n_anchors` scored anchors.
///
/// Peak cells are 3x3 local maxima of the heat map (non-strict, so plateaus
/// qualify), ranked by heat value with ties broken by row-major cell index.
/// Each peak becomes an anchor at its cell center, un-downsampled into
/// normalized image coordinates, carrying the theta predicted at that cell.
pub fn decode_anchors(
    hm_pred: &[f64],
    theta_pred: &[f64],
    grid_h: usize,
    grid_w: usize,
    n_anchors: usize,
    downsample: u32,
) -> Vec<(Anchor, f64)> {
    let mut peaks: Vec<(usize, usize, f64)> = Vec::new();
    for y in 0..grid_h {
        for x in 0..grid_w {
            let v = hm_pred[y * grid_w + x];
            let mut is_peak = true;
            'nbr: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dy == 0 && dx == 0 {
                        continue;
                    }
                    let ny = y as i64 + dy;
                    let nx = x as i64 + dx;
                    if ny < 0 || nx < 0 || ny >= grid_h as i64 || nx >= grid_w as i64 {
                        continue;
                    }
                    if hm_pred[ny as usize * grid_w + nx as usize] > v {
                        is_peak = false;
                        break 'nbr;
                    }
                }
            }
            if is_peak {
                peaks.push((y, x, v));
            }
        }
    }

    // Stable sort by descending score keeps the row-major scan order on ties.
    peaks.sort_by(|a, b| b.2.total_cmp(&a.2));
    peaks.truncate(n_anchors);

    let img_w = (grid_w as u32 * downsample) as f64;
    let img_h = (grid_h as u32 * downsample) as f64;
    peaks
        .into_iter()
        .map(|(y, x, score)| {
            let a = Anchor::new(
                (x as f64 + 0.5) * downsample as f64 / img_w,
                (y as f64 + 0.5) * downsample as f64 / img_h,
                theta_pred[y * grid_w + x],
            );
            (a, score)
        })
        .collect()
}
