//! Large-kernel attention forward pass and its aggregator variants.
//!
//! The shipped design (variant C) forms the attention map as
//! `Att = W1(sum_i MultiCh_i(DConv5(X)))` where branch 0 is the identity
//! path and branches 1..3 are strip-convolution pairs; the block output is
//! `Z1 = Att (.) (W2 X) + X`, `Z = FFN(Z1) + Z1` with `(.)` elementwise.
//! Variants baseline/A/B rebuild the intermediate ablation designs:
//! baseline is `W1(DConv11(Win X))`, A swaps the 11x11 for the strip
//! branches, B adds the identity path back in.

use super::conv::{depthwise_conv, pointwise_conv, DepthwiseKernel, PointwiseWeights};
use super::{KernelError, Tensor};
use rand::Rng;

/// Aggregator design to run; `C` is the shipped one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsaVariant {
    Baseline,
    A,
    B,
    C,
}

/// How a strip pair combines its 1xk and kx1 kernels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StripComposition {
    /// 1xk followed by kx1 (a separable kxk kernel). The default.
    Sequential,
    /// 1xk and kx1 applied to the same input and summed.
    ParallelSum,
}

/// FFN activation between the two 1x1 layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Nonlinearity {
    /// x * sigmoid(x). The default.
    Silu,
    Relu,
    Identity,
}

impl Nonlinearity {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Nonlinearity::Silu => v / (1.0 + (-v).exp()),
            Nonlinearity::Relu => v.max(0.0),
            Nonlinearity::Identity => v,
        }
    }
}

/// A horizontal/vertical strip-kernel pair of one odd size k.
#[derive(Debug, Clone, PartialEq)]
pub struct StripPair {
    /// 1xk kernel.
    pub horiz: DepthwiseKernel,
    /// kx1 kernel.
    pub vert: DepthwiseKernel,
}

impl StripPair {
    pub fn zeros(c: usize, k: usize) -> Self {
        StripPair {
            horiz: DepthwiseKernel::zeros(c, 1, k),
            vert: DepthwiseKernel::zeros(c, k, 1),
        }
    }

    pub fn random<R: Rng>(c: usize, k: usize, rng: &mut R) -> Self {
        StripPair {
            horiz: DepthwiseKernel::random(c, 1, k, rng),
            vert: DepthwiseKernel::random(c, k, 1, rng),
        }
    }
}

/// Two 1x1 layers around a pointwise nonlinearity, no biases.
#[derive(Debug, Clone, PartialEq)]
pub struct FfnWeights {
    pub w_a: PointwiseWeights,
    pub w_b: PointwiseWeights,
    pub nonlinearity: Nonlinearity,
}

impl FfnWeights {
    /// FFN that outputs all zeros (both layers zero).
    pub fn zeros(c: usize) -> Self {
        FfnWeights {
            w_a: PointwiseWeights::zeros(c, c),
            w_b: PointwiseWeights::zeros(c, c),
            nonlinearity: Nonlinearity::Silu,
        }
    }

    pub fn random<R: Rng>(c: usize, hidden: usize, rng: &mut R) -> Self {
        FfnWeights {
            w_a: PointwiseWeights::random(hidden, c, rng),
            w_b: PointwiseWeights::random(c, hidden, rng),
            nonlinearity: Nonlinearity::Silu,
        }
    }
}

/// Default strip sizes for the three multi-scale branches.
pub const DEFAULT_STRIP_SIZES: [usize; 3] = [7, 11, 21];

/// Every weight of the attention block, covering all aggregator variants.
#[derive(Debug, Clone, PartialEq)]
pub struct LkaWeights {
    /// Depthwise 5x5 front conv (variant C front end).
    pub dconv5: DepthwiseKernel,
    /// Depthwise 11x11 conv used by the baseline variant.
    pub dconv11: DepthwiseKernel,
    /// Input 1x1 mix used by baseline/A/B in place of the 5x5 conv.
    pub w_in: PointwiseWeights,
    /// Multi-scale strip branches.
    pub strips: Vec<StripPair>,
    pub composition: StripComposition,
    /// Attention output 1x1 mix.
    pub w1: PointwiseWeights,
    /// Value-path 1x1 mix.
    pub w2: PointwiseWeights,
    pub ffn: FfnWeights,
}

impl LkaWeights {
    /// Pass-through configuration: delta front convs, identity mixes, zero
    /// strips and zero FFN. `msa_forward` returns the input unchanged for
    /// every variant; `lka_forward` reduces to `x (.) x + x`.
    pub fn passthrough(c: usize) -> Self {
        LkaWeights {
            dconv5: DepthwiseKernel::delta(c, 5, 5),
            dconv11: DepthwiseKernel::delta(c, 11, 11),
            w_in: PointwiseWeights::identity(c),
            strips: DEFAULT_STRIP_SIZES
                .iter()
                .map(|&k| StripPair::zeros(c, k))
                .collect(),
            composition: StripComposition::Sequential,
            w1: PointwiseWeights::identity(c),
            w2: PointwiseWeights::identity(c),
            ffn: FfnWeights::zeros(c),
        }
    }

    pub fn random<R: Rng>(c: usize, rng: &mut R) -> Self {
        LkaWeights {
            dconv5: DepthwiseKernel::random(c, 5, 5, rng),
            dconv11: DepthwiseKernel::random(c, 11, 11, rng),
            w_in: PointwiseWeights::random(c, c, rng),
            strips: DEFAULT_STRIP_SIZES
                .iter()
                .map(|&k| StripPair::random(c, k, rng))
                .collect(),
            composition: StripComposition::Sequential,
            w1: PointwiseWeights::random(c, c, rng),
            w2: PointwiseWeights::random(c, c, rng),
            ffn: FfnWeights::random(c, c, rng),
        }
    }
}

fn strip_apply(
    x: &Tensor,
    pair: &StripPair,
    comp: StripComposition,
) -> Result<Tensor, KernelError> {
    match comp {
        StripComposition::Sequential => {
            depthwise_conv(&depthwise_conv(x, &pair.horiz)?, &pair.vert)
        }
        StripComposition::ParallelSum => {
            depthwise_conv(x, &pair.horiz)?.add(&depthwise_conv(x, &pair.vert)?)
        }
    }
}

/// Identity path plus every strip branch, summed.
fn aggregate_with_identity(base: &Tensor, w: &LkaWeights) -> Result<Tensor, KernelError> {
    let mut acc = base.clone();
    for pair in &w.strips {
        acc = acc.add(&strip_apply(base, pair, w.composition)?)?;
    }
    Ok(acc)
}

/// Strip branches only, summed.
fn aggregate_strips(base: &Tensor, w: &LkaWeights) -> Result<Tensor, KernelError> {
    let mut acc = Tensor::zeros(base.c, base.h, base.w);
    for pair in &w.strips {
        acc = acc.add(&strip_apply(base, pair, w.composition)?)?;
    }
    Ok(acc)
}

/// Attention map for the requested aggregator variant.
pub fn msa_forward(x: &Tensor, w: &LkaWeights, variant: MsaVariant) -> Result<Tensor, KernelError> {
    let pre = match variant {
        MsaVariant::Baseline | MsaVariant::A | MsaVariant::B => pointwise_conv(x, &w.w_in)?,
        MsaVariant::C => depthwise_conv(x, &w.dconv5)?,
    };
    let aggregated = match variant {
        MsaVariant::Baseline => depthwise_conv(&pre, &w.dconv11)?,
        MsaVariant::A => aggregate_strips(&pre, w)?,
        MsaVariant::B | MsaVariant::C => aggregate_with_identity(&pre, w)?,
    };
    pointwise_conv(&aggregated, &w.w1)
}

/// Two-layer 1x1 FFN with the configured nonlinearity between layers.
pub fn ffn_apply(x: &Tensor, f: &FfnWeights) -> Result<Tensor, KernelError> {
    let mut hidden = pointwise_conv(x, &f.w_a)?;
    for v in &mut hidden.data {
        *v = f.nonlinearity.apply(*v);
    }
    pointwise_conv(&hidden, &f.w_b)
}

/// Combines a precomputed attention map with the input:
/// `Z1 = att (.) (W2 x) + x`, then `Z = FFN(Z1) + Z1`.
pub fn lka_combine(x: &Tensor, att: &Tensor, w: &LkaWeights) -> Result<Tensor, KernelError> {
    let value = pointwise_conv(x, &w.w2)?;
    let z1 = att.hadamard(&value)?.add(x)?;
    ffn_apply(&z1, &w.ffn)?.add(&z1)
}

/// Full attention block with the shipped variant-C aggregator.
pub fn lka_forward(x: &Tensor, w: &LkaWeights) -> Result<Tensor, KernelError> {
    let att = msa_forward(x, w, MsaVariant::C)?;
    lka_combine(x, &att, w)
}
