//! CPU forward kernels for the attention and deformable-sampling blocks,
//! plus the convolution primitives they are built from. All kernels are
//! pure, f64, zero-padded, and bitwise deterministic; optimized paths may
//! parallelize over output channels. `reference` holds independent naive
//! oracles for every op.

mod conv;
mod deform;
mod lka;
pub mod reference;
mod tensor;

pub use conv::{depthwise_conv, pointwise_conv, DepthwiseKernel, PointwiseWeights};
pub use deform::{
    alau_forward, bilinear, conv3x3, deformable_sample, offset_channels, Conv3x3Weights,
    DeformParams, OffsetNet, SAMPLING_GRID,
};
pub use lka::{
    ffn_apply, lka_combine, lka_forward, msa_forward, FfnWeights, LkaWeights, MsaVariant,
    Nonlinearity, StripComposition, StripPair, DEFAULT_STRIP_SIZES,
};
pub use tensor::Tensor;

/// Errors from kernel evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum KernelError {
    ShapeMismatch { what: &'static str, detail: String },
    BadKernel { reason: String },
}

impl std::fmt::Display for KernelError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelError::ShapeMismatch { what, detail } => {
                write!(f, "shape mismatch in {what}: {detail}")
            }
            KernelError::BadKernel { reason } => write!(f, "bad kernel: {reason}"),
        }
    }
}

impl std::error::Error for KernelError {}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Cross-checks between the optimized kernels and the naive oracles on
    // random small instances. The acceptance suite runs the same comparison
    // at larger trial counts.

    fn random_shape(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
        (
            rng.random_range(1..=8usize),
            rng.random_range(3..=16usize),
            rng.random_range(3..=16usize),
        )
    }

    #[test]
    fn depthwise_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..20 {
            let (c, h, w) = random_shape(&mut rng);
            let x = Tensor::random(c, h, w, &mut rng);
            let kh = 2 * rng.random_range(0..=3usize) + 1;
            let kw = 2 * rng.random_range(0..=3usize) + 1;
            let k = DepthwiseKernel::random(c, kh, kw, &mut rng);
            let fast = depthwise_conv(&x, &k).unwrap();
            let slow = reference::naive_depthwise(&x, &k);
            assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn msa_variants_match_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for variant in [
            MsaVariant::Baseline,
            MsaVariant::A,
            MsaVariant::B,
            MsaVariant::C,
        ] {
            for _ in 0..5 {
                let (c, h, w_) = random_shape(&mut rng);
                let x = Tensor::random(c, h, w_, &mut rng);
                let w = LkaWeights::random(c, &mut rng);
                let fast = msa_forward(&x, &w, variant).unwrap();
                let slow = reference::naive_msa(&x, &w, variant);
                assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-6, "{variant:?}");
            }
        }
    }

    #[test]
    fn lka_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..10 {
            let (c, h, w_) = random_shape(&mut rng);
            let x = Tensor::random(c, h, w_, &mut rng);
            let w = LkaWeights::random(c, &mut rng);
            let fast = lka_forward(&x, &w).unwrap();
            let slow = reference::naive_lka(&x, &w);
            assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn deformable_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        for _ in 0..10 {
            let groups = [1usize, 2][rng.random_range(0..2usize)];
            let c = groups * rng.random_range(1..=4usize);
            let h = rng.random_range(3..=16usize);
            let w = rng.random_range(3..=16usize);
            let feat = Tensor::random(c, h, w, &mut rng);
            let mut offsets = Tensor::random(offset_channels(groups), h, w, &mut rng);
            for v in &mut offsets.data {
                *v *= 2.0;
            }
            let d = DeformParams {
                deform_groups: groups,
                weights: Conv3x3Weights::random(c, c, &mut rng),
            };
            let fast = deformable_sample(&feat, &offsets, &d).unwrap();
            let slow = reference::naive_deformable(&feat, &offsets, &d);
            assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn alau_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(35);
        for _ in 0..10 {
            let groups = 2usize;
            let c = 4usize;
            let h = rng.random_range(3..=12usize);
            let w = rng.random_range(3..=12usize);
            let feat = Tensor::random(c, h, w, &mut rng);
            let guidance = Tensor::random(2, h, w, &mut rng);
            let d = DeformParams {
                deform_groups: groups,
                weights: Conv3x3Weights::random(c, c, &mut rng),
            };
            let net = OffsetNet::random(2, groups, &mut rng);
            let fast = alau_forward(&feat, &guidance, &d, &net).unwrap();
            let slow = reference::naive_alau(&feat, &guidance, &d, &net);
            assert!(fast.max_abs_diff(&slow).unwrap() <= 1e-6);
        }
    }
}
