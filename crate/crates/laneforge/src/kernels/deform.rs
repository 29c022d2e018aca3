//! Deformable 3x3 sampling and the guidance-driven unit built on it.
//!
//! Every output cell gathers, for each of the nine grid taps, a bilinear
//! sample at `(y + dy + off_y, x + dx + off_x)` and mixes the taps with a
//! dense 3x3 convolution. With `deform_groups = 2` the lower and upper
//! channel halves read independent offset fields. Offsets come from a
//! small conv net over the guidance map (heat map + theta map stacked).

use super::{KernelError, Tensor};
use rand::Rng;
use rayon::prelude::*;

/// The fixed 3x3 tap grid, (dy, dx) in row-major order.
pub const SAMPLING_GRID: [(i64, i64); 9] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 0),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// Dense 3x3 convolution weights, row-major `[c_out][c_in][3][3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3x3Weights {
    pub c_out: usize,
    pub c_in: usize,
    pub data: Vec<f64>,
}

impl Conv3x3Weights {
    pub fn new(c_out: usize, c_in: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if data.len() != c_out * c_in * 9 {
            return Err(KernelError::ShapeMismatch {
                what: "3x3 conv weight data",
                detail: format!("expected {} values, got {}", c_out * c_in * 9, data.len()),
            });
        }
        Ok(Conv3x3Weights { c_out, c_in, data })
    }

    /// Channel-wise identity: center tap 1 on the diagonal.
    pub fn identity(c: usize) -> Self {
        let mut data = vec![0.0; c * c * 9];
        for ch in 0..c {
            data[(ch * c + ch) * 9 + 4] = 1.0;
        }
        Conv3x3Weights {
            c_out: c,
            c_in: c,
            data,
        }
    }

    pub fn random<R: Rng>(c_out: usize, c_in: usize, rng: &mut R) -> Self {
        let data = (0..c_out * c_in * 9)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Conv3x3Weights { c_out, c_in, data }
    }

    #[inline]
    pub fn at(&self, co: usize, ci: usize, tap: usize) -> f64 {
        self.data[(co * self.c_in + ci) * 9 + tap]
    }
}

/// Standard dense 3x3 convolution, zero padding, same spatial shape.
pub fn conv3x3(x: &Tensor, w: &Conv3x3Weights) -> Result<Tensor, KernelError> {
    if w.c_in != x.c {
        return Err(KernelError::ShapeMismatch {
            what: "3x3 conv channel count",
            detail: format!("input {} vs weights {}", x.c, w.c_in),
        });
    }
    let (h, wid) = (x.h, x.w);
    let mut out = Tensor::zeros(w.c_out, h, wid);
    out.data
        .par_chunks_mut(h * wid)
        .enumerate()
        .for_each(|(co, plane)| {
            for y in 0..h {
                for xx in 0..wid {
                    let mut acc = 0.0;
                    for ci in 0..x.c {
                        for (tap, &(dy, dx)) in SAMPLING_GRID.iter().enumerate() {
                            acc +=
                                w.at(co, ci, tap) * x.at_or_zero(ci, y as i64 + dy, xx as i64 + dx);
                        }
                    }
                    plane[y * wid + xx] = acc;
                }
            }
        });
    Ok(out)
}

/// Bilinear read at a fractional position; anything outside the plane
/// contributes 0, matching zero conv padding. Integer positions read the
/// value directly so the zero-offset path is bit-identical to [`conv3x3`].
#[inline]
pub fn bilinear(t: &Tensor, c: usize, y: f64, x: f64) -> f64 {
    let y0 = y.floor();
    let x0 = x.floor();
    let fy = y - y0;
    let fx = x - x0;
    let (y0, x0) = (y0 as i64, x0 as i64);
    if fy == 0.0 && fx == 0.0 {
        return t.at_or_zero(c, y0, x0);
    }
    let v00 = t.at_or_zero(c, y0, x0);
    let v01 = t.at_or_zero(c, y0, x0 + 1);
    let v10 = t.at_or_zero(c, y0 + 1, x0);
    let v11 = t.at_or_zero(c, y0 + 1, x0 + 1);
    v00 * (1.0 - fy) * (1.0 - fx) + v01 * (1.0 - fy) * fx + v10 * fy * (1.0 - fx) + v11 * fy * fx
}

/// Deformable sampling configuration: offset-group count plus the tap-mix
/// convolution. `deform_groups` must divide the input channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformParams {
    pub deform_groups: usize,
    pub weights: Conv3x3Weights,
}

/// Number of offset channels a tensor must carry for `groups` offset sets:
/// (dy, dx) per tap per group, layout `[(g * 9 + tap) * 2 + {0:dy, 1:dx}]`.
pub fn offset_channels(groups: usize) -> usize {
    groups * 9 * 2
}

/// Deformed 3x3 convolution: each tap reads a bilinear sample displaced by
/// its per-cell offset, then taps mix exactly as in [`conv3x3`].
pub fn deformable_sample(
    feat: &Tensor,
    offsets: &Tensor,
    d: &DeformParams,
) -> Result<Tensor, KernelError> {
    if d.weights.c_in != feat.c {
        return Err(KernelError::ShapeMismatch {
            what: "deformable channel count",
            detail: format!("input {} vs weights {}", feat.c, d.weights.c_in),
        });
    }
    if d.deform_groups == 0 || !feat.c.is_multiple_of(d.deform_groups) {
        return Err(KernelError::ShapeMismatch {
            what: "deform groups",
            detail: format!(
                "{} groups do not divide {} channels",
                d.deform_groups, feat.c
            ),
        });
    }
    if offsets.c != offset_channels(d.deform_groups) || offsets.h != feat.h || offsets.w != feat.w {
        return Err(KernelError::ShapeMismatch {
            what: "offset tensor",
            detail: format!(
                "expected {}x{}x{}, got {:?}",
                offset_channels(d.deform_groups),
                feat.h,
                feat.w,
                offsets.shape()
            ),
        });
    }

    let (h, wid) = (feat.h, feat.w);
    let channels_per_group = feat.c / d.deform_groups;
    let mut out = Tensor::zeros(d.weights.c_out, h, wid);
    out.data
        .par_chunks_mut(h * wid)
        .enumerate()
        .for_each(|(co, plane)| {
            for y in 0..h {
                for xx in 0..wid {
                    let mut acc = 0.0;
                    for ci in 0..feat.c {
                        let g = ci / channels_per_group;
                        for (tap, &(dy, dx)) in SAMPLING_GRID.iter().enumerate() {
                            let base = (g * 9 + tap) * 2;
                            let off_y = offsets.at(base, y, xx);
                            let off_x = offsets.at(base + 1, y, xx);
                            let sy = y as f64 + dy as f64 + off_y;
                            let sx = xx as f64 + dx as f64 + off_x;
                            acc += d.weights.at(co, ci, tap) * bilinear(feat, ci, sy, sx);
                        }
                    }
                    plane[y * wid + xx] = acc;
                }
            }
        });
    Ok(out)
}

/// Offset predictor: one 3x3 convolution with bias over the guidance map,
/// emitting `offset_channels(groups)` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetNet {
    pub conv: Conv3x3Weights,
    pub bias: Vec<f64>,
}

impl OffsetNet {
    pub fn new(conv: Conv3x3Weights, bias: Vec<f64>) -> Result<Self, KernelError> {
        if bias.len() != conv.c_out {
            return Err(KernelError::ShapeMismatch {
                what: "offset net bias",
                detail: format!("expected {} entries, got {}", conv.c_out, bias.len()),
            });
        }
        Ok(OffsetNet { conv, bias })
    }

    /// Predicts all-zero offsets regardless of guidance.
    pub fn zeros(guidance_c: usize, groups: usize) -> Self {
        let c_out = offset_channels(groups);
        OffsetNet {
            conv: Conv3x3Weights {
                c_out,
                c_in: guidance_c,
                data: vec![0.0; c_out * guidance_c * 9],
            },
            bias: vec![0.0; c_out],
        }
    }

    /// Predicts the same integer shift (dy, dx) at every cell and tap,
    /// via bias terms alone.
    pub fn constant_shift(guidance_c: usize, groups: usize, dy: f64, dx: f64) -> Self {
        let mut net = Self::zeros(guidance_c, groups);
        for g in 0..groups {
            for tap in 0..9 {
                net.bias[(g * 9 + tap) * 2] = dy;
                net.bias[(g * 9 + tap) * 2 + 1] = dx;
            }
        }
        net
    }

    pub fn random<R: Rng>(guidance_c: usize, groups: usize, rng: &mut R) -> Self {
        let c_out = offset_channels(groups);
        OffsetNet {
            conv: Conv3x3Weights::random(c_out, guidance_c, rng),
            bias: (0..c_out).map(|_| rng.random_range(-0.5..0.5)).collect(),
        }
    }

    /// Offset field for a guidance map: conv plus per-channel bias.
    pub fn apply(&self, guidance: &Tensor) -> Result<Tensor, KernelError> {
        let mut out = conv3x3(guidance, &self.conv)?;
        let plane = out.h * out.w;
        for c in 0..out.c {
            let b = self.bias[c];
            for v in &mut out.data[c * plane..(c + 1) * plane] {
                *v += b;
            }
        }
        Ok(out)
    }
}

/// Guidance-driven deformable unit: predict offsets from the guidance map,
/// then run [`deformable_sample`] with them.
pub fn alau_forward(
    feat: &Tensor,
    guidance: &Tensor,
    d: &DeformParams,
    offset_net: &OffsetNet,
) -> Result<Tensor, KernelError> {
    if guidance.h != feat.h || guidance.w != feat.w {
        return Err(KernelError::ShapeMismatch {
            what: "guidance spatial shape",
            detail: format!("feat {:?} vs guidance {:?}", feat.shape(), guidance.shape()),
        });
    }
    let offsets = offset_net.apply(guidance)?;
    deformable_sample(feat, &offsets, d)
}
