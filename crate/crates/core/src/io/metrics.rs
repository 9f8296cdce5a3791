//! Full-reference image metrics on `[0, 1]` RGB buffers.

use crate::{Error, Grid, Result, Vec3};

/// PSNR reported for (near-)identical images.
pub const PSNR_CAP: f64 = 100.0;

fn check_dims(a: &Grid<Vec3>, b: &Grid<Vec3>) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected_width: a.width(),
            expected_height: a.height(),
            width: b.width(),
            height: b.height(),
        });
    }
    if a.data().is_empty() {
        return Err(Error::InvalidArgument("metrics of an empty image".into()));
    }
    Ok(())
}

/// Mean squared error over all pixels and channels.
pub fn mse(a: &Grid<Vec3>, b: &Grid<Vec3>) -> Result<f64> {
    check_dims(a, b)?;
    let sum: f64 = a.data().iter().zip(b.data()).map(|(p, q)| (p - q).norm_squared()).sum();
    Ok(sum / (3 * a.data().len()) as f64)
}

/// `10 log10(1 / MSE)`, capped at 100 dB when MSE < 1e-10.
pub fn psnr(a: &Grid<Vec3>, b: &Grid<Vec3>) -> Result<f64> {
    let e = mse(a, b)?;
    if e < 1e-10 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / e).log10()).min(PSNR_CAP))
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - half;
            (-0.5 * x * x / (sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable filtering keeping only windows fully inside the image.
fn filter_valid(img: &[f64], w: usize, h: usize, kernel: &[f64]) -> (Vec<f64>, usize, usize) {
    let n = kernel.len();
    let (ow, oh) = (w + 1 - n, h + 1 - n);
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = kernel.iter().enumerate().map(|(i, k)| k * img[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = kernel.iter().enumerate().map(|(i, k)| k * rows[(y + i) * ow + x]).sum();
        }
    }
    (out, ow, oh)
}

fn ssim_channel(a: &[f64], b: &[f64], w: usize, h: usize, kernel: &[f64]) -> f64 {
    let prod = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..a.len()).map(f).collect() };
    let (mu_a, _, _) = filter_valid(a, w, h, kernel);
    let (mu_b, _, _) = filter_valid(b, w, h, kernel);
    let (aa, _, _) = filter_valid(&prod(&|i| a[i] * a[i]), w, h, kernel);
    let (bb, _, _) = filter_valid(&prod(&|i| b[i] * b[i]), w, h, kernel);
    let (ab, ow, oh) = filter_valid(&prod(&|i| a[i] * b[i]), w, h, kernel);
    let total: f64 = (0..ow * oh)
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let va = aa[i] - ma * ma;
            let vb = bb[i] - mb * mb;
            let cov = ab[i] - ma * mb;
            ((2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2))
        })
        .sum();
    total / (ow * oh) as f64
}

/// Single-scale SSIM: 11x11 Gaussian window with sigma 1.5, averaged over
/// the valid region and then over channels. Images smaller than the window
/// use the largest odd window that fits.
pub fn ssim(a: &Grid<Vec3>, b: &Grid<Vec3>) -> Result<f64> {
    check_dims(a, b)?;
    let (w, h) = a.dims();
    let mut size = SSIM_WINDOW.min(w).min(h);
    if size % 2 == 0 {
        size -= 1;
    }
    let kernel = gaussian_kernel(size, SSIM_SIGMA);
    let mean: f64 = (0..3)
        .map(|c| {
            let pa: Vec<f64> = a.data().iter().map(|p| p[c]).collect();
            let pb: Vec<f64> = b.data().iter().map(|p| p[c]).collect();
            ssim_channel(&pa, &pb, w, h, &kernel)
        })
        .sum::<f64>()
        / 3.0;
    Ok(mean)
}
