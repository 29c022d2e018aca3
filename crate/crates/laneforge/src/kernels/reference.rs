//! Independent naive re-implementations of every kernel, used as oracles.
//!
//! Everything here is written as plain nested loops with its own index
//! arithmetic and its own bilinear interpolation, sharing only the public
//! weight/tensor types with the optimized paths. Keep it dumb: the value of
//! the oracle is that it cannot share a bug with the code under test.

use super::conv::{DepthwiseKernel, PointwiseWeights};
use super::deform::{Conv3x3Weights, DeformParams, OffsetNet};
use super::lka::{FfnWeights, LkaWeights, MsaVariant, Nonlinearity, StripComposition};
use super::Tensor;

fn read(t: &Tensor, c: usize, y: i64, x: i64) -> f64 {
    if y < 0 || x < 0 || y >= t.h as i64 || x >= t.w as i64 {
        return 0.0;
    }
    t.data[(c * t.h + y as usize) * t.w + x as usize]
}

pub fn naive_depthwise(x: &Tensor, k: &DepthwiseKernel) -> Tensor {
    let mut out = Tensor::zeros(x.c, x.h, x.w);
    for c in 0..x.c {
        for y in 0..x.h {
            for xx in 0..x.w {
                let mut acc = 0.0;
                for ky in 0..k.kh {
                    for kx in 0..k.kw {
                        let w = k.data[(c * k.kh + ky) * k.kw + kx];
                        let sy = y as i64 + ky as i64 - (k.kh / 2) as i64;
                        let sx = xx as i64 + kx as i64 - (k.kw / 2) as i64;
                        acc += w * read(x, c, sy, sx);
                    }
                }
                out.data[(c * x.h + y) * x.w + xx] = acc;
            }
        }
    }
    out
}

pub fn naive_pointwise(x: &Tensor, w: &PointwiseWeights) -> Tensor {
    let mut out = Tensor::zeros(w.c_out, x.h, x.w);
    for co in 0..w.c_out {
        for y in 0..x.h {
            for xx in 0..x.w {
                let mut acc = 0.0;
                for ci in 0..x.c {
                    acc += w.data[co * w.c_in + ci] * x.data[(ci * x.h + y) * x.w + xx];
                }
                out.data[(co * x.h + y) * x.w + xx] = acc;
            }
        }
    }
    out
}

fn naive_add(a: &Tensor, b: &Tensor) -> Tensor {
    let mut out = a.clone();
    for i in 0..out.data.len() {
        out.data[i] += b.data[i];
    }
    out
}

fn naive_strip(
    x: &Tensor,
    horiz: &DepthwiseKernel,
    vert: &DepthwiseKernel,
    comp: StripComposition,
) -> Tensor {
    match comp {
        StripComposition::Sequential => naive_depthwise(&naive_depthwise(x, horiz), vert),
        StripComposition::ParallelSum => {
            naive_add(&naive_depthwise(x, horiz), &naive_depthwise(x, vert))
        }
    }
}

pub fn naive_msa(x: &Tensor, w: &LkaWeights, variant: MsaVariant) -> Tensor {
    let pre = match variant {
        MsaVariant::C => naive_depthwise(x, &w.dconv5),
        _ => naive_pointwise(x, &w.w_in),
    };
    let mut agg = match variant {
        MsaVariant::Baseline => naive_depthwise(&pre, &w.dconv11),
        MsaVariant::A => Tensor::zeros(pre.c, pre.h, pre.w),
        MsaVariant::B | MsaVariant::C => pre.clone(),
    };
    if variant != MsaVariant::Baseline {
        for pair in &w.strips {
            agg = naive_add(
                &agg,
                &naive_strip(&pre, &pair.horiz, &pair.vert, w.composition),
            );
        }
    }
    naive_pointwise(&agg, &w.w1)
}

fn naive_ffn(x: &Tensor, f: &FfnWeights) -> Tensor {
    let mut hidden = naive_pointwise(x, &f.w_a);
    for v in &mut hidden.data {
        *v = match f.nonlinearity {
            Nonlinearity::Silu => *v / (1.0 + (-*v).exp()),
            Nonlinearity::Relu => {
                if *v > 0.0 {
                    *v
                } else {
                    0.0
                }
            }
            Nonlinearity::Identity => *v,
        };
    }
    naive_pointwise(&hidden, &f.w_b)
}

pub fn naive_lka(x: &Tensor, w: &LkaWeights) -> Tensor {
    let att = naive_msa(x, w, MsaVariant::C);
    let value = naive_pointwise(x, &w.w2);
    let mut z1 = Tensor::zeros(x.c, x.h, x.w);
    for i in 0..z1.data.len() {
        z1.data[i] = att.data[i] * value.data[i] + x.data[i];
    }
    naive_add(&naive_ffn(&z1, &w.ffn), &z1)
}

pub fn naive_conv3x3(x: &Tensor, w: &Conv3x3Weights) -> Tensor {
    let mut out = Tensor::zeros(w.c_out, x.h, x.w);
    for co in 0..w.c_out {
        for y in 0..x.h {
            for xx in 0..x.w {
                let mut acc = 0.0;
                for ci in 0..x.c {
                    for ky in 0..3 {
                        for kx in 0..3 {
                            acc += w.data[(co * w.c_in + ci) * 9 + ky * 3 + kx]
                                * read(x, ci, y as i64 + ky as i64 - 1, xx as i64 + kx as i64 - 1);
                        }
                    }
                }
                out.data[(co * x.h + y) * x.w + xx] = acc;
            }
        }
    }
    out
}

fn naive_bilinear(t: &Tensor, c: usize, y: f64, x: f64) -> f64 {
    let yf = y.floor() as i64;
    let xf = x.floor() as i64;
    let wy = y - yf as f64;
    let wx = x - xf as f64;
    let mut acc = 0.0;
    for (iy, fy) in [(yf, 1.0 - wy), (yf + 1, wy)] {
        for (ix, fx) in [(xf, 1.0 - wx), (xf + 1, wx)] {
            acc += fy * fx * read(t, c, iy, ix);
        }
    }
    acc
}

pub fn naive_deformable(feat: &Tensor, offsets: &Tensor, d: &DeformParams) -> Tensor {
    let per_group = feat.c / d.deform_groups;
    let mut out = Tensor::zeros(d.weights.c_out, feat.h, feat.w);
    for co in 0..d.weights.c_out {
        for y in 0..feat.h {
            for xx in 0..feat.w {
                let mut acc = 0.0;
                for ci in 0..feat.c {
                    let g = ci / per_group;
                    for ky in 0..3usize {
                        for kx in 0..3usize {
                            let tap = ky * 3 + kx;
                            let oy = offsets.data[(((g * 9 + tap) * 2) * feat.h + y) * feat.w + xx];
                            let ox =
                                offsets.data[(((g * 9 + tap) * 2 + 1) * feat.h + y) * feat.w + xx];
                            let sy = y as f64 + ky as f64 - 1.0 + oy;
                            let sx = xx as f64 + kx as f64 - 1.0 + ox;
                            acc += d.weights.data[(co * d.weights.c_in + ci) * 9 + tap]
                                * naive_bilinear(feat, ci, sy, sx);
                        }
                    }
                }
                out.data[(co * feat.h + y) * feat.w + xx] = acc;
            }
        }
    }
    out
}

pub fn naive_alau(feat: &Tensor, guidance: &Tensor, d: &DeformParams, net: &OffsetNet) -> Tensor {
    let mut offsets = naive_conv3x3(guidance, &net.conv);
    for c in 0..offsets.c {
        for i in 0..offsets.h * offsets.w {
            offsets.data[c * offsets.h * offsets.w + i] += net.bias[c];
        }
    }
    naive_deformable(feat, &offsets, d)
}
