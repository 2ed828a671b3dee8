use std::f64::consts::PI;

use super::{require_2d, LinearOperator};
use crate::error::{Error, Result};

/// Periodic 2-D blur by the discrete Gaussian kernel.
///
/// Each axis uses the circulant kernel with transfer function
/// `exp(sigma^2 (cos w - 1))`, the sampled-lattice analogue of a Gaussian of
/// standard deviation `sigma`. It sums to one, is symmetric, and composes
/// exactly: blur(s1) then blur(s2) equals blur(sqrt(s1^2 + s2^2)).
#[derive(Clone, Debug)]
pub struct GaussianBlur {
    shape: [usize; 2],
    sigma: f64,
    row_kernel: Vec<f64>,
    col_kernel: Vec<f64>,
}

impl GaussianBlur {
    pub fn new(image_shape: &[usize], sigma: f64) -> Result<Self> {
        let (h, w) = require_2d(image_shape, "gaussian blur")?;
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::invalid(format!("blur sigma must be positive, got {sigma}")));
        }
        Ok(Self {
            shape: [h, w],
            sigma,
            row_kernel: circulant_kernel(h, sigma),
            col_kernel: circulant_kernel(w, sigma),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    fn convolve(&self, x: &[f64], out: &mut [f64]) {
        let [h, w] = self.shape;
        let mut tmp = vec![0.0; h * w];
        // along columns (within each row)
        for r in 0..h {
            let row = &x[r * w..(r + 1) * w];
            for c in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in self.col_kernel.iter().enumerate() {
                    acc += kv * row[(c + w - k) % w];
                }
                tmp[r * w + c] = acc;
            }
        }
        for r in 0..h {
            for c in 0..w {
                let mut acc = 0.0;
                for (k, &kv) in self.row_kernel.iter().enumerate() {
                    acc += kv * tmp[((r + h - k) % h) * w + c];
                }
                out[r * w + c] = acc;
            }
        }
    }
}

/// Inverse DFT of `exp(sigma^2 (cos(2 pi j / n) - 1))`.
fn circulant_kernel(n: usize, sigma: f64) -> Vec<f64> {
    let s2 = sigma * sigma;
    let transfer: Vec<f64> = (0..n)
        .map(|j| (s2 * ((2.0 * PI * j as f64 / n as f64).cos() - 1.0)).exp())
        .collect();
    (0..n)
        .map(|m| {
            transfer
                .iter()
                .enumerate()
                .map(|(j, &hj)| hj * (2.0 * PI * ((j * m) % n) as f64 / n as f64).cos())
                .sum::<f64>()
                / n as f64
        })
        .collect()
}

impl LinearOperator for GaussianBlur {
    fn shape_in(&self) -> &[usize] {
        &self.shape
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.convolve(x, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.convolve(y, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::tensor::{SeededRng, Tensor};

    #[test]
    fn kernel_is_normalized_and_symmetric() {
        let k = circulant_kernel(16, 1.3);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        for m in 1..16 {
            assert!((k[m] - k[16 - m]).abs() < 1e-14);
        }
        assert!(k.iter().all(|&v| v > -1e-15));
    }

    #[test]
    fn constant_image_unchanged() {
        let b = GaussianBlur::new(&[12, 9], 2.0).unwrap();
        let x = Tensor::full(&[12, 9], 3.25).unwrap();
        let y = b.apply(&x).unwrap();
        for v in y.as_slice() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn semigroup_against_dense_composition() {
        let sigma = 1.1;
        let b1 = GaussianBlur::new(&[16, 16], sigma).unwrap();
        let b2 = GaussianBlur::new(&[16, 16], sigma * 2f64.sqrt()).unwrap();
        let d1 = DenseMatrix::from_operator(&b1).unwrap();
        let d2 = DenseMatrix::from_operator(&b2).unwrap();
        let composed = d1.matmul(&d1).unwrap();
        assert!(composed.max_abs_diff(&d2).unwrap() < 1e-8);

        let mut rng = SeededRng::new(3);
        let x = Tensor::gaussian(&[16, 16], &mut rng).unwrap();
        let twice = b1.apply(&b1.apply(&x).unwrap()).unwrap();
        let once = b2.apply(&x).unwrap();
        assert!(twice.sub(&once).unwrap().max_abs() < 1e-8);
    }

    #[test]
    fn self_adjoint() {
        let b = GaussianBlur::new(&[8, 8], 0.7).unwrap();
        let mut rng = SeededRng::new(9);
        let y = Tensor::gaussian(&[8, 8], &mut rng).unwrap();
        assert_eq!(b.adjoint(&y).unwrap(), b.apply(&y).unwrap());
    }

    #[test]
    fn rejects_bad_sigma() {
        assert!(GaussianBlur::new(&[8, 8], 0.0).is_err());
        assert!(GaussianBlur::new(&[8, 8], -1.0).is_err());
        assert!(GaussianBlur::new(&[8], 1.0).is_err());
    }
}
