//! Matrix-free linear operators: measurement systems `A` and the Gram form
//! of the regularizing transform `T^T T`.
//!
//! Implementors provide slice kernels; the provided `apply`/`adjoint`
//! methods handle shape checks and allocation.

mod blur;
mod checks;
mod dense;
mod laplacian;
mod radon;
mod resample;

use std::fmt;
use std::sync::Arc;

pub use blur::GaussianBlur;
pub use checks::{adjoint_mismatch, partial_isometry_check, PARTIAL_ISOMETRY_PROBES};
pub use dense::{DenseOperator, Identity, Scaled};
pub use laplacian::LaplacianGram;
pub use radon::ToyRadon;
pub use resample::{BlockDownsample, Mask, NearestUpsample};

use crate::error::Result;
use crate::tensor::Tensor;

pub type SharedOperator = Arc<dyn LinearOperator>;

pub trait LinearOperator: Send + Sync + fmt::Debug {
    fn shape_in(&self) -> &[usize];

    fn shape_out(&self) -> &[usize];

    /// `out = A x`. `out` arrives zeroed.
    fn forward_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = A^T y`. `out` arrives zeroed.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &Tensor) -> Result<Tensor> {
        x.check_shape(self.shape_in())?;
        let mut out = Tensor::zeros(self.shape_out())?;
        self.forward_into(x.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    fn adjoint(&self, y: &Tensor) -> Result<Tensor> {
        y.check_shape(self.shape_out())?;
        let mut out = Tensor::zeros(self.shape_in())?;
        self.adjoint_into(y.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    /// `A^T A x`.
    fn normal(&self, x: &Tensor) -> Result<Tensor> {
        self.adjoint(&self.apply(x)?)
    }

    fn dim_in(&self) -> usize {
        self.shape_in().iter().product()
    }

    fn dim_out(&self) -> usize {
        self.shape_out().iter().product()
    }
}

pub(crate) fn require_2d(shape: &[usize], what: &str) -> Result<(usize, usize)> {
    match *shape {
        [h, w] if h > 0 && w > 0 => Ok((h, w)),
        _ => Err(crate::error::Error::invalid(format!(
            "{what} needs a non-empty 2-D image shape, got {shape:?}"
        ))),
    }
}
