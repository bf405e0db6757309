use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{SeededRng, Tensor};
use crate::recon::{ImageSet, ImageTensor};
use crate::rib::LabeledDataset;

/// Isotropic Gaussian classes. Class `k` is centred at
/// `separation/√2 · e_k`, so every pair of centres is `separation` apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlobSpec {
    pub samples: usize,
    pub classes: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
}

/// Labels cycle through the classes in sample order.
pub fn gaussian_blobs(spec: &BlobSpec, rng: &mut SeededRng) -> Result<LabeledDataset> {
    let BlobSpec { samples, classes, dim, separation, sigma } = *spec;
    if classes < 2 || classes > dim || samples == 0 {
        return Err(Error::InvalidParams("blobs need 2 ≤ classes ≤ dim and at least one sample".into()));
    }
    if !(separation >= 0.0) || !(sigma > 0.0) {
        return Err(Error::InvalidParams("separation must be ≥ 0 and sigma > 0".into()));
    }
    let offset = separation / 2f64.sqrt();
    let mut data = Vec::with_capacity(samples * dim);
    let mut labels = Vec::with_capacity(samples);
    for n in 0..samples {
        let k = n % classes;
        data.extend((0..dim).map(|j| if j == k { offset } else { 0.0 } + sigma * rng.normal()));
        labels.push(k);
    }
    LabeledDataset::new(Tensor::new(vec![samples, dim], data)?, labels, classes)
}

/// Smooth test images: a random linear ramp plus a low-frequency cosine per
/// channel, min-max normalized so each channel spans [0, 1] exactly.
pub fn gradient_images(
    count: usize,
    height: usize,
    width: usize,
    channels: usize,
    rng: &mut SeededRng,
) -> Result<ImageSet> {
    if count == 0 || height < 2 || width < 2 || channels == 0 {
        return Err(Error::InvalidParams("gradient images need count ≥ 1 and sides ≥ 2".into()));
    }
    let images = (0..count)
        .map(|_| {
            let mut data = vec![0.0; height * width * channels];
            for c in 0..channels {
                let angle = 2.0 * PI * rng.uniform();
                let (fx, fy) = (1.0 + 2.0 * rng.uniform(), 1.0 + 2.0 * rng.uniform());
                let (phase, amp) = (2.0 * PI * rng.uniform(), 0.5 * rng.uniform());
                let plane: Vec<f64> = (0..height * width)
                    .map(|p| {
                        let y = (p / width) as f64 / (height - 1) as f64;
                        let x = (p % width) as f64 / (width - 1) as f64;
                        let ramp = angle.cos() * x + angle.sin() * y;
                        ramp + amp * (PI * (fx * x + fy * y) + phase).cos()
                    })
                    .collect();
                let (lo, hi) = plane.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
                for (p, v) in plane.iter().enumerate() {
                    data[p * channels + c] = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
                }
            }
            ImageTensor::new(height, width, channels, data)
        })
        .collect::<Result<Vec<_>>>()?;
    ImageSet::new(images)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(separation: f64) -> BlobSpec {
        BlobSpec { samples: 4000, classes: 2, dim: 4, separation, sigma: 1.0 }
    }

    /// Accuracy of the Bayes rule for two equal-variance classes: project
    /// onto the centre difference and threshold at the midpoint.
    fn bayes_accuracy(ds: &LabeledDataset) -> f64 {
        let correct = (0..ds.len())
            .filter(|&n| {
                let r = ds.samples.row(n);
                let pred = usize::from(r[1] - r[0] > 0.0);
                pred == ds.labels[n]
            })
            .count();
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn separation_controls_accuracy() {
        let mut rng = SeededRng::new(1);
        let near = gaussian_blobs(&spec(0.0), &mut rng).unwrap();
        assert!((bayes_accuracy(&near) - 0.5).abs() < 0.03);
        // Error rate Φ(−4) ≈ 3e-5 at 8σ.
        let far = gaussian_blobs(&spec(8.0), &mut rng).unwrap();
        assert!(bayes_accuracy(&far) >= 0.99);
    }

    #[test]
    fn deterministic_under_seed() {
        let a = gaussian_blobs(&spec(2.0), &mut SeededRng::new(7)).unwrap();
        let b = gaussian_blobs(&spec(2.0), &mut SeededRng::new(7)).unwrap();
        assert_eq!(a, b);
        let ia = gradient_images(3, 8, 8, 3, &mut SeededRng::new(7)).unwrap();
        let ib = gradient_images(3, 8, 8, 3, &mut SeededRng::new(7)).unwrap();
        assert_eq!(ia, ib);
    }

    #[test]
    fn gradients_span_unit_range() {
        let set = gradient_images(4, 16, 16, 3, &mut SeededRng::new(2)).unwrap();
        for im in &set.images {
            for c in 0..3 {
                let ch = im.channel(c);
                assert_eq!(ch.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
                assert_eq!(ch.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
            }
        }
    }
}
