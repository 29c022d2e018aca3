//! Convolution primitives: per-channel (depthwise) spatial correlation and
//! 1x1 channel mixing, both with zero padding and unchanged spatial shape.

use super::{KernelError, Tensor};
use rand::Rng;
use rayon::prelude::*;

/// One spatial kernel per channel, laid out `[c][kh][kw]`. Both kernel
/// dimensions must be odd so "same" padding is symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthwiseKernel {
    pub c: usize,
    pub kh: usize,
    pub kw: usize,
    pub data: Vec<f64>,
}

impl DepthwiseKernel {
    pub fn new(c: usize, kh: usize, kw: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return Err(KernelError::BadKernel {
                reason: format!("kernel dims must be odd, got {kh}x{kw}"),
            });
        }
        if data.len() != c * kh * kw {
            return Err(KernelError::ShapeMismatch {
                what: "depthwise kernel data",
                detail: format!("expected {} values, got {}", c * kh * kw, data.len()),
            });
        }
        Ok(DepthwiseKernel { c, kh, kw, data })
    }

    /// Identity kernel: 1 at the center of every channel.
    pub fn delta(c: usize, kh: usize, kw: usize) -> Self {
        let mut data = vec![0.0; c * kh * kw];
        for ch in 0..c {
            data[(ch * kh + kh / 2) * kw + kw / 2] = 1.0;
        }
        DepthwiseKernel { c, kh, kw, data }
    }

    pub fn zeros(c: usize, kh: usize, kw: usize) -> Self {
        DepthwiseKernel {
            c,
            kh,
            kw,
            data: vec![0.0; c * kh * kw],
        }
    }

    pub fn ones(c: usize, kh: usize, kw: usize) -> Self {
        DepthwiseKernel {
            c,
            kh,
            kw,
            data: vec![1.0; c * kh * kw],
        }
    }

    pub fn random<R: Rng>(c: usize, kh: usize, kw: usize, rng: &mut R) -> Self {
        let data = (0..c * kh * kw)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        DepthwiseKernel { c, kh, kw, data }
    }

    #[inline]
    fn at(&self, c: usize, ky: usize, kx: usize) -> f64 {
        self.data[(c * self.kh + ky) * self.kw + kx]
    }
}

/// Per-channel 2D correlation with zero padding; spatial shape preserved.
pub fn depthwise_conv(x: &Tensor, k: &DepthwiseKernel) -> Result<Tensor, KernelError> {
    if k.c != x.c {
        return Err(KernelError::ShapeMismatch {
            what: "depthwise channel count",
            detail: format!("input {} vs kernel {}", x.c, k.c),
        });
    }
    let (h, w) = (x.h, x.w);
    let (ry, rx) = (k.kh as i64 / 2, k.kw as i64 / 2);
    let mut out = Tensor::zeros(x.c, h, w);
    out.data
        .par_chunks_mut(h * w)
        .enumerate()
        .for_each(|(c, plane)| {
            for y in 0..h {
                for xx in 0..w {
                    let mut acc = 0.0;
                    for ky in 0..k.kh {
                        for kx in 0..k.kw {
                            let sy = y as i64 + ky as i64 - ry;
                            let sx = xx as i64 + kx as i64 - rx;
                            acc += k.at(c, ky, kx) * x.at_or_zero(c, sy, sx);
                        }
                    }
                    plane[y * w + xx] = acc;
                }
            }
        });
    Ok(out)
}

/// 1x1 channel-mixing weights, row-major `[c_out][c_in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseWeights {
    pub c_out: usize,
    pub c_in: usize,
    pub data: Vec<f64>,
}

impl PointwiseWeights {
    pub fn new(c_out: usize, c_in: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if data.len() != c_out * c_in {
            return Err(KernelError::ShapeMismatch {
                what: "pointwise weight data",
                detail: format!("expected {} values, got {}", c_out * c_in, data.len()),
            });
        }
        Ok(PointwiseWeights { c_out, c_in, data })
    }

    pub fn identity(c: usize) -> Self {
        let mut data = vec![0.0; c * c];
        for i in 0..c {
            data[i * c + i] = 1.0;
        }
        PointwiseWeights {
            c_out: c,
            c_in: c,
            data,
        }
    }

    pub fn zeros(c_out: usize, c_in: usize) -> Self {
        PointwiseWeights {
            c_out,
            c_in,
            data: vec![0.0; c_out * c_in],
        }
    }

    pub fn random<R: Rng>(c_out: usize, c_in: usize, rng: &mut R) -> Self {
        let data = (0..c_out * c_in)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        PointwiseWeights { c_out, c_in, data }
    }
}

/// 1x1 convolution: every output channel is a weighted sum of the input
/// channels at the same cell.
pub fn pointwise_conv(x: &Tensor, w: &PointwiseWeights) -> Result<Tensor, KernelError> {
    if w.c_in != x.c {
        return Err(KernelError::ShapeMismatch {
            what: "pointwise channel count",
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
                        acc += w.data[co * w.c_in + ci] * x.at(ci, y, xx);
                    }
                    plane[y * wid + xx] = acc;
                }
            }
        });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn delta_kernel_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::random(3, 6, 7, &mut rng);
        let out = depthwise_conv(&x, &DepthwiseKernel::delta(3, 5, 5)).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn ones_row_kernel_hand_case() {
        let x = Tensor::from_vec(1, 1, 3, vec![0.0, 1.0, 0.0]).unwrap();
        let k = DepthwiseKernel::ones(1, 1, 3);
        let out = depthwise_conv(&x, &k).unwrap();
        assert_eq!(out.data, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn zero_kernel_zeroes_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::random(2, 4, 4, &mut rng);
        let out = depthwise_conv(&x, &DepthwiseKernel::zeros(2, 3, 3)).unwrap();
        assert!(out.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn kernel_validation() {
        assert!(DepthwiseKernel::new(1, 2, 3, vec![0.0; 6]).is_err());
        assert!(DepthwiseKernel::new(1, 3, 3, vec![0.0; 8]).is_err());
        let x = Tensor::zeros(2, 4, 4);
        assert!(depthwise_conv(&x, &DepthwiseKernel::delta(3, 3, 3)).is_err());
    }

    #[test]
    fn pointwise_identity_and_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::random(4, 3, 3, &mut rng);
        let out = pointwise_conv(&x, &PointwiseWeights::identity(4)).unwrap();
        assert_eq!(out, x);
        assert!(pointwise_conv(&x, &PointwiseWeights::identity(3)).is_err());
    }

    #[test]
    fn pointwise_mixes_channels() {
        let x = Tensor::from_vec(2, 1, 2, vec![1.0, 2.0, 10.0, 20.0]).unwrap();
        let w = PointwiseWeights::new(1, 2, vec![2.0, 3.0]).unwrap();
        let out = pointwise_conv(&x, &w).unwrap();
        assert_eq!(out.data, vec![32.0, 64.0]);
    }

    proptest! {
        // Convolution is linear in the input.
        #[test]
        fn depthwise_is_linear(seed in 0u64..1000, a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::random(2, 5, 6, &mut rng);
            let y = Tensor::random(2, 5, 6, &mut rng);
            let k = DepthwiseKernel::random(2, 3, 5, &mut rng);
            let lhs = depthwise_conv(&x.scale(a).add(&y.scale(b)).unwrap(), &k).unwrap();
            let rhs = depthwise_conv(&x, &k).unwrap().scale(a)
                .add(&depthwise_conv(&y, &k).unwrap().scale(b)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9);
        }

        #[test]
        fn pointwise_is_linear(seed in 0u64..1000, a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Tensor::random(3, 4, 4, &mut rng);
            let y = Tensor::random(3, 4, 4, &mut rng);
            let w = PointwiseWeights::random(2, 3, &mut rng);
            let lhs = pointwise_conv(&x.scale(a).add(&y.scale(b)).unwrap(), &w).unwrap();
            let rhs = pointwise_conv(&x, &w).unwrap().scale(a)
                .add(&pointwise_conv(&y, &w).unwrap().scale(b)).unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-9);
        }
    }
}
