use serde::{Deserialize, Serialize};

use super::ImageTensor;
use crate::error::{Error, Result};

/// PSNR reported when the images (almost) coincide.
pub const PSNR_CAP_DB: f64 = 99.0;
const MSE_FLOOR: f64 = 1e-10;

/// Conventional five-scale exponents; fewer scales use a renormalized prefix.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconMetrics {
    pub mse: f64,
    pub psnr: f64,
    /// `None` for images smaller than the SSIM window.
    pub ms_ssim: Option<f64>,
}

impl ReconMetrics {
    pub fn between(a: &ImageTensor, b: &ImageTensor) -> Result<Self> {
        let mse = mse(a, b)?;
        Ok(ReconMetrics { mse, psnr: psnr_from_mse(mse), ms_ssim: ms_ssim_if_fits(a, b)? })
    }
}

/// MS-SSIM when at least one scale fits the image.
pub fn ms_ssim_if_fits(a: &ImageTensor, b: &ImageTensor) -> Result<Option<f64>> {
    if max_scales(a.height, a.width) == 0 {
        a.same_shape(b)?;
        return Ok(None);
    }
    ms_ssim(a, b).map(Some)
}

pub fn mse(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    a.same_shape(b)?;
    Ok(mse_slices(&a.data, &b.data))
}

pub(crate) fn mse_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// `10·log10(1/mse)` for unit-range images, capped at 99 dB.
pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse < MSE_FLOOR {
        PSNR_CAP_DB
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
    }
}

pub fn psnr(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// Largest scale count (≤ 5) whose coarsest level still fits the window.
pub fn max_scales(height: usize, width: usize) -> usize {
    (1..=MS_SSIM_WEIGHTS.len()).rev().find(|&s| height.min(width) >= (1 << (s - 1)) * WINDOW).unwrap_or(0)
}

/// MS-SSIM with as many scales as the image allows.
pub fn ms_ssim(a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
    ms_ssim_scales(a, b, max_scales(a.height, a.width).max(1))
}

/// MS-SSIM over `scales` levels with a Gaussian 11×11 (σ = 1.5) window,
/// valid-region filtering and 2×2 average pooling between levels. Per-scale
/// terms are clamped at zero before exponentiation; channels are averaged.
pub fn ms_ssim_scales(a: &ImageTensor, b: &ImageTensor, scales: usize) -> Result<f64> {
    a.same_shape(b)?;
    if scales == 0 || scales > MS_SSIM_WEIGHTS.len() || a.height.min(a.width) < (1 << (scales - 1)) * WINDOW {
        return Err(Error::ImageTooSmall { height: a.height, width: a.width, scales });
    }
    let wsum: f64 = MS_SSIM_WEIGHTS[..scales].iter().sum();
    let weights: Vec<f64> = MS_SSIM_WEIGHTS[..scales].iter().map(|w| w / wsum).collect();
    let kernel = gaussian_kernel();
    let mut total = 0.0;
    for ch in 0..a.channels {
        let mut x = a.channel(ch);
        let mut y = b.channel(ch);
        let (mut h, mut w) = (a.height, a.width);
        let mut value = 1.0;
        for (s, &wt) in weights.iter().enumerate() {
            let (lum, cs) = ssim_terms(&x, &y, h, w, &kernel);
            let term = if s + 1 == scales { lum * cs } else { cs };
            value *= term.max(0.0).powf(wt);
            if s + 1 < scales {
                (x, _, _) = pool2(&x, h, w);
                (y, h, w) = pool2(&y, h, w);
            }
        }
        total += value;
    }
    Ok(total / a.channels as f64)
}

fn gaussian_kernel() -> Vec<f64> {
    let c = (WINDOW / 2) as f64;
    let k: Vec<f64> =
        (0..WINDOW).map(|i| (-((i as f64 - c).powi(2)) / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter().map(|v| v / s).collect()
}

/// Separable valid-region filtering.
fn filter(x: &[f64], h: usize, w: usize, k: &[f64]) -> Vec<f64> {
    let n = k.len();
    let (oh, ow) = (h - n + 1, w - n + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x0 in 0..ow {
            rows[y * ow + x0] = (0..n).map(|i| k[i] * x[y * w + x0 + i]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y0 in 0..oh {
        for x0 in 0..ow {
            out[y0 * ow + x0] = (0..n).map(|i| k[i] * rows[(y0 + i) * ow + x0]).sum();
        }
    }
    out
}

/// Mean luminance and contrast-structure terms of single-scale SSIM.
fn ssim_terms(x: &[f64], y: &[f64], h: usize, w: usize, k: &[f64]) -> (f64, f64) {
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let (mx, my) = (filter(x, h, w, k), filter(y, h, w, k));
    let (sxx, syy, sxy) = (filter(&xx, h, w, k), filter(&yy, h, w, k), filter(&xy, h, w, k));
    let n = mx.len() as f64;
    let (mut lum, mut cs) = (0.0, 0.0);
    for i in 0..mx.len() {
        let vx = sxx[i] - mx[i] * mx[i];
        let vy = syy[i] - my[i] * my[i];
        let cxy = sxy[i] - mx[i] * my[i];
        lum += (2.0 * mx[i] * my[i] + C1) / (mx[i] * mx[i] + my[i] * my[i] + C1);
        cs += (2.0 * cxy + C2) / (vx + vy + C2);
    }
    (lum / n, cs / n)
}

fn pool2(x: &[f64], h: usize, w: usize) -> (Vec<f64>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x0 in 0..ow {
            let at = |dy: usize, dx: usize| x[(2 * y + dy) * w + 2 * x0 + dx];
            out[y * ow + x0] = 0.25 * (at(0, 0) + at(0, 1) + at(1, 0) + at(1, 1));
        }
    }
    (out, oh, ow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::SeededRng;

    fn texture(h: usize, w: usize, seed: u64) -> ImageTensor {
        let mut rng = SeededRng::new(seed);
        let data = (0..h * w).map(|k| 0.5 + 0.2 * ((k % w) as f64 * 0.7).sin() + 0.1 * rng.uniform()).collect();
        ImageTensor::new(h, w, 1, data).unwrap()
    }

    #[test]
    fn psnr_reference_points() {
        let a = texture(12, 12, 1);
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        let b = ImageTensor::new(12, 12, 1, a.data.iter().map(|v| v + 0.1).collect()).unwrap();
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        assert!(psnr(&a, &texture(11, 12, 1)).is_err());
    }

    #[test]
    fn ms_ssim_identity_symmetry_and_negative() {
        let a = texture(48, 48, 2);
        let b = texture(48, 48, 3);
        assert!((ms_ssim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert!((ms_ssim(&a, &b).unwrap() - ms_ssim(&b, &a).unwrap()).abs() < 1e-12);
        let neg = ImageTensor::new(48, 48, 1, a.data.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ms_ssim(&a, &neg).unwrap() < 0.5);
    }

    #[test]
    fn scale_count_limits() {
        assert_eq!(max_scales(16, 16), 1);
        assert_eq!(max_scales(28, 28), 2);
        assert_eq!(max_scales(176, 200), 5);
        let a = texture(16, 16, 1);
        assert!(matches!(ms_ssim_scales(&a, &a, 2), Err(Error::ImageTooSmall { .. })));
    }
}
