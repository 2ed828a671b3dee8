use super::{require_2d, LinearOperator};
use crate::error::Result;

/// `G = T^T T = -0.5 * Laplacian` (5-point stencil, periodic).
///
/// Only the Gram form is exposed; `T` itself is never built.
#[derive(Clone, Debug)]
pub struct LaplacianGram {
    shape: [usize; 2],
}

impl LaplacianGram {
    pub fn new(image_shape: &[usize]) -> Result<Self> {
        let (h, w) = require_2d(image_shape, "laplacian")?;
        Ok(Self { shape: [h, w] })
    }

    fn stencil(&self, x: &[f64], out: &mut [f64]) {
        let [h, w] = self.shape;
        for r in 0..h {
            let up = ((r + h - 1) % h) * w;
            let down = ((r + 1) % h) * w;
            for c in 0..w {
                let left = (c + w - 1) % w;
                let right = (c + 1) % w;
                let lap = x[up + c] + x[down + c] + x[r * w + left] + x[r * w + right]
                    - 4.0 * x[r * w + c];
                out[r * w + c] = -0.5 * lap;
            }
        }
    }
}

impl LinearOperator for LaplacianGram {
    fn shape_in(&self) -> &[usize] {
        &self.shape
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        self.stencil(x, out);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.stencil(y, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{dot, SeededRng, Tensor};

    #[test]
    fn constants_are_annihilated() {
        let g = LaplacianGram::new(&[6, 7]).unwrap();
        let y = g.apply(&Tensor::full(&[6, 7], 2.5).unwrap()).unwrap();
        assert!(y.max_abs() < 1e-15);
    }

    #[test]
    fn impulse_response() {
        let g = LaplacianGram::new(&[5, 5]).unwrap();
        let mut x = Tensor::zeros(&[5, 5]).unwrap();
        x.as_mut_slice()[2 * 5 + 2] = 1.0;
        let y = g.apply(&x).unwrap();
        let v = y.as_slice();
        assert_eq!(v[12], 2.0);
        for i in [7, 17, 11, 13] {
            assert_eq!(v[i], -0.5);
        }
        assert_eq!(y.sum(), 0.0);
    }

    #[test]
    fn quadratic_form_equals_difference_sum() {
        // oracle: <x, Gx> = 0.5 * sum of squared forward differences (periodic)
        let (h, w) = (7, 5);
        let g = LaplacianGram::new(&[h, w]).unwrap();
        let mut rng = SeededRng::new(4);
        for _ in 0..10 {
            let x = Tensor::gaussian(&[h, w], &mut rng).unwrap();
            let q = dot(&x, &g.apply(&x).unwrap()).unwrap();
            let v = x.as_slice();
            let mut diff = 0.0;
            for r in 0..h {
                for c in 0..w {
                    let dx = v[r * w + (c + 1) % w] - v[r * w + c];
                    let dy = v[((r + 1) % h) * w + c] - v[r * w + c];
                    diff += dx * dx + dy * dy;
                }
            }
            assert!(q >= 0.0);
            assert!((q - 0.5 * diff).abs() < 1e-12 * diff.max(1.0));
        }
    }

    #[test]
    fn rejects_non_2d() {
        assert!(LaplacianGram::new(&[16]).is_err());
        assert!(LaplacianGram::new(&[2, 2, 2]).is_err());
    }
}
