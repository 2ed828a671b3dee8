use std::collections::HashSet;

use super::{require_2d, LinearOperator};
use crate::error::{Error, Result};

/// Averages each `factor x factor` block.
#[derive(Clone, Debug)]
pub struct BlockDownsample {
    shape_in: [usize; 2],
    shape_out: [usize; 2],
    factor: usize,
}

impl BlockDownsample {
    pub fn new(image_shape: &[usize], factor: usize) -> Result<Self> {
        let (h, w) = require_2d(image_shape, "block downsample")?;
        check_factor(h, w, factor)?;
        Ok(Self {
            shape_in: [h, w],
            shape_out: [h / factor, w / factor],
            factor,
        })
    }

    pub fn factor(&self) -> usize {
        self.factor
    }
}

fn check_factor(h: usize, w: usize, factor: usize) -> Result<()> {
    if factor == 0 || !h.is_multiple_of(factor) || !w.is_multiple_of(factor) {
        return Err(Error::invalid(format!(
            "image {h}x{w} is not divisible by factor {factor}"
        )));
    }
    Ok(())
}

impl LinearOperator for BlockDownsample {
    fn shape_in(&self) -> &[usize] {
        &self.shape_in
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape_out
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let f = self.factor;
        let [_, w] = self.shape_in;
        let [ho, wo] = self.shape_out;
        let inv = 1.0 / (f * f) as f64;
        for r in 0..ho {
            for c in 0..wo {
                let mut acc = 0.0;
                for dr in 0..f {
                    let base = (r * f + dr) * w + c * f;
                    acc += x[base..base + f].iter().sum::<f64>();
                }
                out[r * wo + c] = acc * inv;
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let f = self.factor;
        let [h, w] = self.shape_in;
        let wo = self.shape_out[1];
        let inv = 1.0 / (f * f) as f64;
        for r in 0..h {
            for c in 0..w {
                out[r * w + c] = y[(r / f) * wo + c / f] * inv;
            }
        }
    }
}

/// Replicates each pixel into a `factor x factor` block.
#[derive(Clone, Debug)]
pub struct NearestUpsample {
    shape_in: [usize; 2],
    shape_out: [usize; 2],
    factor: usize,
}

impl NearestUpsample {
    pub fn new(small_shape: &[usize], factor: usize) -> Result<Self> {
        let (h, w) = require_2d(small_shape, "nearest upsample")?;
        if factor == 0 {
            return Err(Error::invalid("upsample factor must be positive"));
        }
        Ok(Self {
            shape_in: [h, w],
            shape_out: [h * factor, w * factor],
            factor,
        })
    }
}

impl LinearOperator for NearestUpsample {
    fn shape_in(&self) -> &[usize] {
        &self.shape_in
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape_out
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let f = self.factor;
        let [h, w] = self.shape_out;
        let wi = self.shape_in[1];
        for r in 0..h {
            for c in 0..w {
                out[r * w + c] = x[(r / f) * wi + c / f];
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let f = self.factor;
        let [h, w] = self.shape_out;
        let wi = self.shape_in[1];
        for r in 0..h {
            for c in 0..w {
                out[(r / f) * wi + c / f] += y[r * w + c];
            }
        }
    }
}

/// Keeps the listed flat pixel indices (inpainting measurement).
#[derive(Clone, Debug)]
pub struct Mask {
    shape_in: Vec<usize>,
    shape_out: [usize; 1],
    kept: Vec<usize>,
}

impl Mask {
    pub fn new(image_shape: &[usize], kept: Vec<usize>) -> Result<Self> {
        if image_shape.is_empty() || image_shape.contains(&0) {
            return Err(Error::invalid(format!("bad mask image shape {image_shape:?}")));
        }
        let len: usize = image_shape.iter().product();
        if kept.is_empty() {
            return Err(Error::invalid("mask keeps no pixels"));
        }
        let mut seen = HashSet::with_capacity(kept.len());
        for &i in &kept {
            if i >= len {
                return Err(Error::invalid(format!("mask index {i} out of range for {len} pixels")));
            }
            if !seen.insert(i) {
                return Err(Error::invalid(format!("duplicate mask index {i}")));
            }
        }
        Ok(Self {
            shape_in: image_shape.to_vec(),
            shape_out: [kept.len()],
            kept,
        })
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }
}

impl LinearOperator for Mask {
    fn shape_in(&self) -> &[usize] {
        &self.shape_in
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape_out
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, &i) in out.iter_mut().zip(&self.kept) {
            *o = x[i];
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        for (&v, &i) in y.iter().zip(&self.kept) {
            out[i] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::linop::adjoint_mismatch;
    use crate::tensor::{SeededRng, Tensor};

    #[test]
    fn downsample_constant() {
        let d = BlockDownsample::new(&[4, 4], 2).unwrap();
        let y = d.apply(&Tensor::full(&[4, 4], 5.0).unwrap()).unwrap();
        assert_eq!(y.shape(), &[2, 2]);
        assert!(y.as_slice().iter().all(|&v| v == 5.0));
    }

    #[test]
    fn downsample_is_scaled_partial_isometry() {
        // dense oracle: A = f^2 A A^T A
        let d = BlockDownsample::new(&[8, 8], 2).unwrap();
        let a = DenseMatrix::from_operator(&d).unwrap();
        let at = a.transpose();
        let aaa = a.matmul(&at).unwrap().matmul(&a).unwrap().scaled(4.0);
        assert!(aaa.max_abs_diff(&a).unwrap() < 1e-14);
    }

    #[test]
    fn downsample_rejects_indivisible() {
        assert!(BlockDownsample::new(&[6, 8], 4).is_err());
        assert!(BlockDownsample::new(&[8, 8], 0).is_err());
    }

    #[test]
    fn adjoint_tests() {
        let mut rng = SeededRng::new(11);
        let d = BlockDownsample::new(&[8, 8], 2).unwrap();
        assert!(adjoint_mismatch(&d, 32, &mut rng).unwrap() < 1e-12);
        let u = NearestUpsample::new(&[4, 4], 2).unwrap();
        assert!(adjoint_mismatch(&u, 32, &mut rng).unwrap() < 1e-12);
        let m = Mask::new(&[4, 4], vec![0, 3, 5, 15]).unwrap();
        assert!(adjoint_mismatch(&m, 32, &mut rng).unwrap() < 1e-12);
    }

    #[test]
    fn upsample_replicates() {
        let u = NearestUpsample::new(&[1, 2], 2).unwrap();
        let y = u.apply(&Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[1.0, 1.0, 2.0, 2.0, 1.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn mask_behaviour() {
        let all = Mask::new(&[2, 2], vec![0, 1, 2, 3]).unwrap();
        let x = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(all.apply(&x).unwrap().as_slice(), x.as_slice());

        let m = Mask::new(&[2, 2], vec![2, 0]).unwrap();
        let y = m.apply(&x).unwrap();
        assert_eq!(y.as_slice(), &[3.0, 1.0]);
        assert_eq!(m.adjoint(&y).unwrap().as_slice(), &[1.0, 0.0, 3.0, 0.0]);

        assert!(Mask::new(&[2, 2], vec![4]).is_err());
        assert!(Mask::new(&[2, 2], vec![1, 1]).is_err());
        assert!(Mask::new(&[2, 2], vec![]).is_err());
    }
}
