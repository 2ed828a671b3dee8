use super::{LinearOperator, SharedOperator};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

#[derive(Clone, Debug)]
pub struct Identity {
    shape: Vec<usize>,
}

impl Identity {
    pub fn new(shape: &[usize]) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::invalid(format!("bad identity shape {shape:?}")));
        }
        Ok(Self {
            shape: shape.to_vec(),
        })
    }
}

impl LinearOperator for Identity {
    fn shape_in(&self) -> &[usize] {
        &self.shape
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// `c * A`.
#[derive(Clone, Debug)]
pub struct Scaled {
    inner: SharedOperator,
    factor: f64,
}

impl Scaled {
    pub fn new(inner: SharedOperator, factor: f64) -> Result<Self> {
        if !factor.is_finite() || factor == 0.0 {
            return Err(Error::invalid(format!("scale factor must be finite and nonzero, got {factor}")));
        }
        Ok(Self { inner, factor })
    }
}

impl LinearOperator for Scaled {
    fn shape_in(&self) -> &[usize] {
        self.inner.shape_in()
    }

    fn shape_out(&self) -> &[usize] {
        self.inner.shape_out()
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner.forward_into(x, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inner.adjoint_into(y, out);
        out.iter_mut().for_each(|v| *v *= self.factor);
    }
}

/// Explicit row-major matrix acting on flattened tensors.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    matrix: DenseMatrix,
    shape_in: Vec<usize>,
    shape_out: Vec<usize>,
}

impl DenseOperator {
    pub fn new(matrix: DenseMatrix) -> Self {
        let shape_in = vec![matrix.cols()];
        let shape_out = vec![matrix.rows()];
        Self {
            matrix,
            shape_in,
            shape_out,
        }
    }

    pub fn with_shapes(matrix: DenseMatrix, shape_in: &[usize], shape_out: &[usize]) -> Result<Self> {
        if shape_in.iter().product::<usize>() != matrix.cols()
            || shape_out.iter().product::<usize>() != matrix.rows()
        {
            return Err(Error::invalid(format!(
                "{}x{} matrix cannot map {shape_in:?} -> {shape_out:?}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        Ok(Self {
            matrix,
            shape_in: shape_in.to_vec(),
            shape_out: shape_out.to_vec(),
        })
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn shape_in(&self) -> &[usize] {
        &self.shape_in
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape_out
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.matrix.matvec_into(x, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.matrix.matvec_transpose_into(y, out);
    }
}
