//! Covariance functions and covariance-matrix assembly.
//!
//! Only the anisotropic squared-exponential family is provided; the
//! [`Kernel`] trait keeps the door open for alternatives.

use ndarray::{Array2, ArrayView1, ArrayView2, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{NumericsError, SpdMatrix};

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("point dimension mismatch: kernel has {expected}, point has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("output scale must be strictly positive, got {0}")]
    NonPositiveOutputScale(f64),
    #[error("length weights must be non-negative, got {0}")]
    NegativeLengthWeight(f64),
    #[error("kernel needs at least one input dimension")]
    EmptyDimension,
    #[error("noise variance must be non-negative, got {0}")]
    NegativeNoise(f64),
}

/// Stationary covariance over points in R^d.
pub trait Kernel {
    fn dim(&self) -> usize;

    fn eval(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64, KernelError>;

    /// Self-covariance k(x, x); constant for stationary kernels.
    fn self_cov(&self) -> f64;

    /// Matrix of pairwise covariances between two point sets (rows are
    /// points).
    fn cov_matrix(
        &self,
        a: ArrayView2<'_, f64>,
        b: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>, KernelError>;
}

/// Anisotropic squared exponential:
/// k(x, x') = θ₀² · exp(−Σ_k θ_k² (x_k − x'_k)²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeKernel {
    output_scale: f64,
    length_weights: Vec<f64>,
}

impl SeKernel {
    pub fn new(output_scale: f64, length_weights: Vec<f64>) -> Result<Self, KernelError> {
        if !(output_scale > 0.0) {
            return Err(KernelError::NonPositiveOutputScale(output_scale));
        }
        if length_weights.is_empty() {
            return Err(KernelError::EmptyDimension);
        }
        if let Some(&w) = length_weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(KernelError::NegativeLengthWeight(w));
        }
        Ok(Self {
            output_scale,
            length_weights,
        })
    }

    /// Unit kernel (θ₀ = 1, all θ_k = 1) in `d` dimensions.
    pub fn unit(d: usize) -> Self {
        Self {
            output_scale: 1.0,
            length_weights: vec![1.0; d],
        }
    }

    pub fn output_scale(&self) -> f64 {
        self.output_scale
    }

    pub fn length_weights(&self) -> &[f64] {
        &self.length_weights
    }

    fn check_dim(&self, found: usize) -> Result<(), KernelError> {
        if found != self.dim() {
            return Err(KernelError::DimensionMismatch {
                expected: self.dim(),
                found,
            });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> f64 {
        let mut arg = 0.0;
        for ((&xv, &yv), &w) in x.iter().zip(y.iter()).zip(&self.length_weights) {
            let d = xv - yv;
            arg += w * w * d * d;
        }
        self.output_scale * self.output_scale * (-arg).exp()
    }
}

impl Kernel for SeKernel {
    fn dim(&self) -> usize {
        self.length_weights.len()
    }

    fn eval(&self, x: ArrayView1<'_, f64>, y: ArrayView1<'_, f64>) -> Result<f64, KernelError> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    fn self_cov(&self) -> f64 {
        self.output_scale * self.output_scale
    }

    fn cov_matrix(
        &self,
        a: ArrayView2<'_, f64>,
        b: ArrayView2<'_, f64>,
    ) -> Result<Array2<f64>, KernelError> {
        self.check_dim(a.ncols())?;
        self.check_dim(b.ncols())?;
        let mut out = Array2::zeros((a.nrows(), b.nrows()));
        Zip::indexed(out.rows_mut()).par_for_each(|i, mut row| {
            let xi = a.row(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.eval_unchecked(xi, b.row(j));
            }
        });
        Ok(out)
    }
}

/// Observation noise variance σ²; doubles as the regularization nugget on
/// Gram matrix diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub const ZERO: NoiseSpec = NoiseSpec { variance: 0.0 };

    pub fn new(variance: f64) -> Result<Self, KernelError> {
        if !(variance >= 0.0) {
            return Err(KernelError::NegativeNoise(variance));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// m + σ²·I, validated as a symmetric positive-diagonal matrix.
pub fn add_noise_diagonal(
    mut m: Array2<f64>,
    noise: NoiseSpec,
) -> Result<SpdMatrix, NumericsError> {
    let n = m.nrows();
    for i in 0..n.min(m.ncols()) {
        m[[i, i]] += noise.variance;
    }
    SpdMatrix::new(m)
}
