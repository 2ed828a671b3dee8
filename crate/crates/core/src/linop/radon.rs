use std::f64::consts::PI;

use super::LinearOperator;
use crate::error::{Error, Result};

/// Ray sample spacing along each line, in pixels.
const RAY_STEP: f64 = 0.5;

/// Parallel-beam projector on an `n x n` image.
///
/// Views are equally spaced in `[0, pi)`. Detectors are centred on the
/// rotation axis and span the image diagonal. Each line integral is a
/// midpoint sum of bilinear samples; the stencil is stored once and the
/// adjoint (backprojection) reuses the same weights, so it is the exact
/// transpose of the discretization.
#[derive(Clone, Debug)]
pub struct ToyRadon {
    shape_in: [usize; 2],
    shape_out: [usize; 2],
    row_start: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl ToyRadon {
    pub fn new(image_size: usize, n_views: usize, n_detectors: usize) -> Result<Self> {
        if image_size < 8 {
            return Err(Error::invalid(format!("toy radon needs image_size >= 8, got {image_size}")));
        }
        if n_views == 0 || n_detectors == 0 {
            return Err(Error::invalid("toy radon needs at least one view and one detector"));
        }
        let n = image_size;
        let centre = (n as f64 - 1.0) / 2.0;
        let span = n as f64 * 2f64.sqrt();
        let det_step = span / n_detectors as f64;
        let samples = (span / RAY_STEP).ceil() as usize + 1;

        let mut row_start = Vec::with_capacity(n_views * n_detectors + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_start.push(0);
        for v in 0..n_views {
            let theta = PI * v as f64 / n_views as f64;
            let (sin, cos) = theta.sin_cos();
            for d in 0..n_detectors {
                let s = (d as f64 - (n_detectors as f64 - 1.0) / 2.0) * det_step;
                for k in 0..samples {
                    let tau = (k as f64 - (samples as f64 - 1.0) / 2.0) * RAY_STEP;
                    let x = s * cos - tau * sin;
                    let y = s * sin + tau * cos;
                    let col = x + centre;
                    let row = centre - y;
                    push_bilinear(n, row, col, RAY_STEP, &mut cols, &mut weights);
                }
                row_start.push(cols.len());
            }
        }
        Ok(Self {
            shape_in: [n, n],
            shape_out: [n_views, n_detectors],
            row_start,
            cols,
            weights,
        })
    }
}

fn push_bilinear(n: usize, row: f64, col: f64, scale: f64, cols: &mut Vec<u32>, weights: &mut Vec<f64>) {
    let r0 = row.floor();
    let c0 = col.floor();
    let fr = row - r0;
    let fc = col - c0;
    for (dr, wr) in [(0.0, 1.0 - fr), (1.0, fr)] {
        for (dc, wc) in [(0.0, 1.0 - fc), (1.0, fc)] {
            let r = r0 + dr;
            let c = c0 + dc;
            let w = wr * wc * scale;
            if w == 0.0 || r < 0.0 || c < 0.0 || r >= n as f64 || c >= n as f64 {
                continue;
            }
            cols.push((r as usize * n + c as usize) as u32);
            weights.push(w);
        }
    }
}

impl LinearOperator for ToyRadon {
    fn shape_in(&self) -> &[usize] {
        &self.shape_in
    }

    fn shape_out(&self) -> &[usize] {
        &self.shape_out
    }

    fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let range = self.row_start[i]..self.row_start[i + 1];
            *o = self.cols[range.clone()]
                .iter()
                .zip(&self.weights[range])
                .map(|(&c, &w)| w * x[c as usize])
                .sum();
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        for (i, &yi) in y.iter().enumerate() {
            let range = self.row_start[i]..self.row_start[i + 1];
            for (&c, &w) in self.cols[range.clone()].iter().zip(&self.weights[range]) {
                out[c as usize] += w * yi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linop::adjoint_mismatch;
    use crate::tensor::{SeededRng, Tensor};

    fn disk(n: usize, radius: f64) -> Tensor {
        let c = (n as f64 - 1.0) / 2.0;
        Tensor::from_fn(&[n, n], |i| {
            let (r, col) = ((i / n) as f64, (i % n) as f64);
            if (r - c).hypot(col - c) <= radius {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let a = ToyRadon::new(16, 8, 23).unwrap();
        let y = a.apply(&Tensor::zeros(&[16, 16]).unwrap()).unwrap();
        assert_eq!(y.shape(), &[8, 23]);
        assert_eq!(y.max_abs(), 0.0);
    }

    #[test]
    fn adjoint_is_exact_transpose() {
        let a = ToyRadon::new(16, 8, 23).unwrap();
        let mut rng = SeededRng::new(21);
        assert!(adjoint_mismatch(&a, 32, &mut rng).unwrap() < 1e-10);
    }

    #[test]
    fn centred_disk_projections_are_symmetric() {
        let n = 24;
        let nd = 34;
        let a = ToyRadon::new(n, 12, nd).unwrap();
        let y = a.apply(&disk(n, 7.0)).unwrap();
        let v = y.as_slice();
        for view in 0..12 {
            let p = &v[view * nd..(view + 1) * nd];
            for k in 0..nd {
                assert!((p[k] - p[nd - 1 - k]).abs() < 1e-8, "view {view} det {k}");
            }
        }
    }

    #[test]
    fn disk_projection_tracks_chord_length() {
        // direct ray integration of the continuous disk: chord 2 sqrt(R^2 - s^2)
        let n = 48;
        let nd = 68;
        let radius = 15.0;
        let a = ToyRadon::new(n, 6, nd).unwrap();
        let y = a.apply(&disk(n, radius)).unwrap();
        let ds = n as f64 * 2f64.sqrt() / nd as f64;
        let v = y.as_slice();
        for view in 0..6 {
            for k in 0..nd {
                let s = (k as f64 - (nd as f64 - 1.0) / 2.0) * ds;
                if s.abs() > radius - 3.0 {
                    continue;
                }
                let chord = 2.0 * (radius * radius - s * s).sqrt();
                let got = v[view * nd + k];
                assert!((got - chord).abs() < 0.1 * chord, "view {view} s {s}: {got} vs {chord}");
            }
        }
    }

    #[test]
    fn rejects_degenerate_sizes() {
        assert!(ToyRadon::new(4, 8, 8).is_err());
        assert!(ToyRadon::new(16, 0, 8).is_err());
        assert!(ToyRadon::new(16, 8, 0).is_err());
    }
}
