use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

fn check(x: &Tensor, reference: &Tensor, data_range: f64) -> Result<()> {
    if x.shape() != reference.shape() {
        return Err(Error::invalid(format!(
            "metric inputs differ in shape: {:?} vs {:?}",
            x.shape(),
            reference.shape()
        )));
    }
    if !(data_range > 0.0) {
        return Err(Error::invalid(format!("data_range must be positive, got {data_range}")));
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB; `+inf` for identical images.
pub fn psnr(x: &Tensor, reference: &Tensor, data_range: f64) -> Result<f64> {
    check(x, reference, data_range)?;
    let mse = x
        .as_slice()
        .iter()
        .zip(reference.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let half = (size / 2) as f64;
    let g: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Separable filtering over the valid region (no padding).
fn filter_valid(img: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let m = k.len();
    let (oh, ow) = (h - m + 1, w - m + 1);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            rows[r * ow + c] = (0..m).map(|j| k[j] * img[r * w + c + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..m).map(|j| k[j] * rows[(r + j) * ow + c]).sum();
        }
    }
    out
}

/// Side of the SSIM window for an `h x w` image: [`SSIM_WINDOW`], or the
/// largest odd size that fits when the image is smaller.
pub fn ssim_window_size(h: usize, w: usize) -> usize {
    let m = SSIM_WINDOW.min(h).min(w);
    if m.is_multiple_of(2) {
        m - 1
    } else {
        m
    }
}

/// Mean structural similarity with an 11x11 Gaussian window (sigma 1.5),
/// evaluated where the window fits entirely inside the image.
pub fn ssim(x: &Tensor, reference: &Tensor, data_range: f64) -> Result<f64> {
    check(x, reference, data_range)?;
    let (h, w) = match *x.shape() {
        [h, w] => (h, w),
        _ => return Err(Error::invalid("ssim needs 2-D images")),
    };
    if h < 3 || w < 3 {
        return Err(Error::invalid(format!("ssim needs images of at least 3x3, got {h}x{w}")));
    }
    let k = gaussian_window(ssim_window_size(h, w));
    let a = x.as_slice();
    let b = reference.as_slice();
    let prod = |f: &dyn Fn(usize) -> f64| (0..a.len()).map(f).collect::<Vec<f64>>();
    let mu_a = filter_valid(a, h, w, &k);
    let mu_b = filter_valid(b, h, w, &k);
    let aa = filter_valid(&prod(&|i| a[i] * a[i]), h, w, &k);
    let bb = filter_valid(&prod(&|i| b[i] * b[i]), h, w, &k);
    let ab = filter_valid(&prod(&|i| a[i] * b[i]), h, w, &k);
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}
