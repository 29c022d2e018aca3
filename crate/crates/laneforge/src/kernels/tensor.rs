//! Dense CHW tensor used by the forward kernels.

use super::KernelError;
use rand::Rng;

/// Row-major (channel, height, width) tensor of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor {
            c,
            h,
            w,
            data: vec![0.0; c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<f64>) -> Result<Self, KernelError> {
        if data.len() != c * h * w {
            return Err(KernelError::ShapeMismatch {
                what: "tensor data",
                detail: format!(
                    "expected {} values for {c}x{h}x{w}, got {}",
                    c * h * w,
                    data.len()
                ),
            });
        }
        Ok(Tensor { c, h, w, data })
    }

    /// Uniform random values in [-1, 1].
    pub fn random<R: Rng>(c: usize, h: usize, w: usize, rng: &mut R) -> Self {
        let data = (0..c * h * w)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Tensor { c, h, w, data }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.c, self.h, self.w)
    }

    #[inline]
    pub fn idx(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.h + y) * self.w + x
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx(c, y, x)]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        let i = self.idx(c, y, x);
        &mut self.data[i]
    }

    /// Zero-padded read: out-of-bounds integer positions return 0.
    #[inline]
    pub fn at_or_zero(&self, c: usize, y: i64, x: i64) -> f64 {
        if y < 0 || x < 0 || y >= self.h as i64 || x >= self.w as i64 {
            0.0
        } else {
            self.at(c, y as usize, x as usize)
        }
    }

    fn require_same_shape(&self, other: &Tensor, what: &'static str) -> Result<(), KernelError> {
        if self.shape() != other.shape() {
            return Err(KernelError::ShapeMismatch {
                what,
                detail: format!("{:?} vs {:?}", self.shape(), other.shape()),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, KernelError> {
        self.require_same_shape(other, "elementwise add")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data,
        })
    }

    /// Elementwise (Hadamard) product.
    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor, KernelError> {
        self.require_same_shape(other, "hadamard product")?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .collect();
        Ok(Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data,
        })
    }

    pub fn scale(&self, s: f64) -> Tensor {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    /// Largest absolute elementwise difference; shapes must match.
    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64, KernelError> {
        self.require_same_shape(other, "max abs diff")?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }
}
