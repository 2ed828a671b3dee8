use mesb::harness::{psnr, ssim, SSIM_K1, SSIM_K2, SSIM_SIGMA};
use mesb::{SeededRng, Tensor};

/// Straight 2-D window loops, no separability, weights built per offset.
fn ssim_reference(a: &[f64], b: &[f64], h: usize, w: usize, m: usize, range: f64) -> f64 {
    let half = (m / 2) as f64;
    let mut wts = vec![vec![0.0; m]; m];
    let mut total = 0.0;
    for (i, row) in wts.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let d2 = (i as f64 - half).powi(2) + (j as f64 - half).powi(2);
            *v = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            total += *v;
        }
    }
    let c1 = (SSIM_K1 * range).powi(2);
    let c2 = (SSIM_K2 * range).powi(2);
    let mut acc = 0.0;
    let mut count = 0;
    for r0 in 0..=h - m {
        for c0 in 0..=w - m {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..m {
                for j in 0..m {
                    let k = wts[i][j] / total;
                    let (x, y) = (a[(r0 + i) * w + c0 + j], b[(r0 + i) * w + c0 + j]);
                    ma += k * x;
                    mb += k * y;
                    saa += k * x * x;
                    sbb += k * y * y;
                    sab += k * x * y;
                }
            }
            let (va, vb, cov) = (saa - ma * ma, sbb - mb * mb, sab - ma * mb);
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    acc / count as f64
}

fn fixture(seed: u64, h: usize, w: usize) -> (Tensor, Tensor) {
    let mut rng = SeededRng::new(seed);
    let a = Tensor::from_fn(&[h, w], |i| ((i % w) as f64 / w as f64 + 0.2 * rng.uniform()).min(1.0)).unwrap();
    let noise = Tensor::gaussian(&[h, w], &mut rng).unwrap();
    let b = a.zip_map(&noise, |v, n| (v + 0.05 * n).clamp(0.0, 1.0)).unwrap();
    (a, b)
}

#[test]
fn ssim_matches_direct_window_loops() {
    for (seed, h, w, m) in [(1, 8, 8, 7), (2, 16, 16, 11), (3, 13, 20, 11), (4, 9, 6, 5)] {
        let (a, b) = fixture(seed, h, w);
        let got = ssim(&b, &a, 1.0).unwrap();
        let want = ssim_reference(b.as_slice(), a.as_slice(), h, w, m, 1.0);
        assert!((got - want).abs() <= 1e-10, "{h}x{w}: {got} vs {want}");
    }
}

#[test]
fn ssim_of_constant_images_has_closed_form() {
    let (p, q) = (0.3, 0.7);
    let a = Tensor::full(&[12, 12], p).unwrap();
    let b = Tensor::full(&[12, 12], q).unwrap();
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let want = (2.0 * p * q + c1) / (p * p + q * q + c1);
    assert!((ssim(&a, &b, 1.0).unwrap() - want).abs() <= 1e-12);
}

#[test]
fn psnr_matches_scalar_loop() {
    for seed in 0..4 {
        let (a, b) = fixture(10 + seed, 8, 8);
        let mut se = 0.0;
        for i in 0..64 {
            se += (a.as_slice()[i] - b.as_slice()[i]).powi(2);
        }
        let want = 10.0 * (1.0 / (se / 64.0)).log10();
        let got = psnr(&b, &a, 1.0).unwrap();
        assert!((got - want).abs() <= 1e-10, "{got} vs {want}");
        let got2 = psnr(&b.scale(2.0), &a.scale(2.0), 2.0).unwrap();
        assert!((got2 - want).abs() <= 1e-10);
    }
}
