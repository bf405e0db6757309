//! Image-reconstruction track: a stage-structured autoencoder, a multi-bit
//! uniform quantizer feeding the BPSK link, MSE training and quality metrics.

mod metrics;
mod pipeline;
mod train;

pub use metrics::{
    max_scales, ms_ssim, ms_ssim_if_fits, ms_ssim_scales, mse, psnr, psnr_from_mse, ReconMetrics, MS_SSIM_WEIGHTS,
    PSNR_CAP_DB,
};
pub use pipeline::space_to_depth_perm;
pub(crate) use train::psnr_row;
pub use train::{
    decoder_mse_gradients, encoder_feature_gradients, evaluate_recon, recon_mse_loss, train_recon, ReconConfig,
    ReconEpochMetrics,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::Transceiver;
use crate::nncore::{LayerKind, LayerSpec, Mode, NetworkParams, SeededRng, Tensor};
use pipeline::Step;

/// An `H×W×C` image, row-major with interleaved channels, values in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageTensor {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels || data.is_empty() {
            return Err(Error::shape(&[height, width, channels], &[data.len()]));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("image".into()));
        }
        Ok(ImageTensor { height, width, channels, data })
    }

    /// Like [`ImageTensor::new`] but clamps values into [0, 1].
    pub fn clamped(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        ImageTensor::new(height, width, channels, data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.height, self.width, self.channels]
    }

    pub fn same_shape(&self, other: &ImageTensor) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(&self.shape(), &other.shape()));
        }
        Ok(())
    }

    /// One channel as a row-major plane.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }
}

/// Same-shaped images.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSet {
    pub images: Vec<ImageTensor>,
}

impl ImageSet {
    pub fn new(images: Vec<ImageTensor>) -> Result<Self> {
        let first = images.first().ok_or_else(|| Error::InsufficientData("empty image set".into()))?;
        for im in &images {
            first.same_shape(im)?;
        }
        Ok(ImageSet { images })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn shape(&self) -> [usize; 3] {
        self.images[0].shape()
    }

    /// `[n × H·W·C]` batch of the selected images.
    pub fn batch(&self, idx: &[usize]) -> Tensor {
        let [h, w, c] = self.shape();
        let mut data = Vec::with_capacity(idx.len() * h * w * c);
        for &i in idx {
            data.extend_from_slice(&self.images[i].data);
        }
        Tensor::new(vec![idx.len(), h * w * c], data).expect("images share a shape")
    }

    pub fn to_tensor(&self) -> Tensor {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }

    pub fn head(&self, n: usize) -> ImageSet {
        ImageSet { images: self.images[..n.min(self.len())].to_vec() }
    }
}

/// One encoder stage: merge `factor × factor` patches, then map every
/// position to `channels` features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub factor: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AutoencoderSpec {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub stages: Vec<StageSpec>,
    /// Continuous bottleneck features F.
    pub features: usize,
    /// Quantizer bits per feature b; the link carries `d = F·b` symbols.
    pub bits_per_feature: usize,
    /// Quantizer clipping range r.
    pub range: f64,
    /// Hidden widths of the decoder front that maps equalized symbols to
    /// the coarsest feature map.
    #[serde(default)]
    pub front_hidden: Vec<usize>,
    /// Squash equalized symbols with tanh before the front.
    #[serde(default = "default_true")]
    pub bounded_input: bool,
}

fn default_true() -> bool {
    true
}

impl AutoencoderSpec {
    /// Desk-scale default for 16×16 RGB images, 512 transmitted bits.
    pub fn desk_rgb16() -> Self {
        AutoencoderSpec {
            height: 16,
            width: 16,
            channels: 3,
            stages: vec![StageSpec { factor: 2, channels: 24 }, StageSpec { factor: 2, channels: 48 }],
            features: 256,
            bits_per_feature: 2,
            range: 3.0,
            front_hidden: vec![256],
            bounded_input: true,
        }
    }

    pub fn bits(&self) -> usize {
        self.features * self.bits_per_feature
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=8).contains(&self.bits_per_feature) {
            return Err(Error::InvalidParams(format!("bits per feature {} outside 1..=8", self.bits_per_feature)));
        }
        if !(self.range > 0.0) || !self.range.is_finite() {
            return Err(Error::InvalidParams(format!("quantizer range must be positive, got {}", self.range)));
        }
        if self.features == 0 || self.pixels() == 0 || self.front_hidden.contains(&0) {
            return Err(Error::InvalidParams("image and bottleneck sizes must be ≥ 1".into()));
        }
        self.resolutions().map(|_| ())
    }

    /// `(h, w, c)` at the input of every stage plus the final resolution.
    fn resolutions(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut res = vec![(self.height, self.width, self.channels)];
        for s in &self.stages {
            let (h, w, _) = *res.last().unwrap();
            if s.factor == 0 || s.channels == 0 || h % s.factor != 0 || w % s.factor != 0 {
                return Err(Error::InvalidParams(format!("stage factor {} does not divide {h}×{w}", s.factor)));
            }
            res.push((h / s.factor, w / s.factor, s.channels));
        }
        Ok(res)
    }

    fn encoder_steps(&self) -> Result<Vec<Step>> {
        let res = self.resolutions()?;
        let mut steps = Vec::new();
        for (k, s) in self.stages.iter().enumerate() {
            let (h, w, c) = res[k];
            steps.push(Step::Gather(space_to_depth_perm(h, w, c, s.factor)?));
            steps.push(Step::Net(k));
        }
        steps.push(Step::Net(self.stages.len()));
        Ok(steps)
    }

    fn decoder_steps(&self) -> Result<Vec<Step>> {
        let res = self.resolutions()?;
        let mut steps = vec![Step::Net(0)];
        for (n, k) in (0..self.stages.len()).rev().enumerate() {
            let (h, w, c) = res[k];
            steps.push(Step::Net(n + 1));
            steps.push(Step::Scatter(space_to_depth_perm(h, w, c, self.stages[k].factor)?));
        }
        Ok(steps)
    }

    /// Expected `(in, out)` widths of encoder then decoder networks.
    fn network_dims(&self) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>)> {
        let res = self.resolutions()?;
        let mut enc = Vec::new();
        for (k, s) in self.stages.iter().enumerate() {
            enc.push((s.factor * s.factor * res[k].2, s.channels));
        }
        let (h, w, c) = *res.last().unwrap();
        enc.push((h * w * c, self.features));
        let mut dec = vec![(2 * self.bits(), h * w * c)];
        for k in (0..self.stages.len()).rev() {
            let s = self.stages[k];
            dec.push((s.channels, s.factor * s.factor * res[k].2));
        }
        Ok((enc, dec))
    }
}

/// Encoder `ψ_i` and decoder `θ_i` of one reconstruction user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconPair {
    pub index: usize,
    pub spec: AutoencoderSpec,
    /// Stage networks followed by the feature head.
    pub encoder: Vec<NetworkParams>,
    /// Front network followed by the mirrored stages, coarsest first.
    pub decoder: Vec<NetworkParams>,
}

impl ReconPair {
    /// ReLU stages, a linear feature head, a ReLU front and a sigmoid on the
    /// final pixel stage.
    pub fn new(index: usize, spec: &AutoencoderSpec, rng: &mut SeededRng) -> Result<Self> {
        spec.validate()?;
        let (enc_dims, dec_dims) = spec.network_dims()?;
        let last_enc = enc_dims.len() - 1;
        let encoder = enc_dims
            .iter()
            .enumerate()
            .map(|(k, &(i, o))| {
                let act = if k == last_enc { None } else { Some(LayerKind::Relu) };
                NetworkParams::mlp(&[i, o], LayerKind::Relu, act, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        let last_dec = dec_dims.len() - 1;
        let decoder = dec_dims
            .iter()
            .enumerate()
            .map(|(k, &(i, o))| {
                let act = if k == last_dec { LayerKind::Sigmoid } else { LayerKind::Relu };
                if k > 0 {
                    return NetworkParams::mlp(&[i, o], LayerKind::Relu, Some(act), rng);
                }
                let mut layers = Vec::new();
                if spec.bounded_input {
                    layers.push(LayerSpec::elementwise(LayerKind::Tanh, i));
                }
                let dims: Vec<usize> = std::iter::once(i).chain(spec.front_hidden.iter().copied()).chain([o]).collect();
                layers.extend(NetworkParams::mlp_layers(&dims, LayerKind::Relu, Some(act))?);
                NetworkParams::new(layers, rng)
            })
            .collect::<Result<Vec<_>>>()?;
        ReconPair::from_networks(index, spec.clone(), encoder, decoder)
    }

    pub fn from_networks(
        index: usize,
        spec: AutoencoderSpec,
        encoder: Vec<NetworkParams>,
        decoder: Vec<NetworkParams>,
    ) -> Result<Self> {
        let pair = ReconPair { index, spec, encoder, decoder };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let (enc, dec) = self.spec.network_dims()?;
        for (nets, dims, what) in [(&self.encoder, enc, "encoder"), (&self.decoder, dec, "decoder")] {
            if nets.len() != dims.len() {
                return Err(Error::Schema(format!("{what} needs {} networks, found {}", dims.len(), nets.len())));
            }
            for (k, (net, (i, o))) in nets.iter().zip(dims).enumerate() {
                net.validate()?;
                if net.in_dim() != i || net.out_dim() != o {
                    return Err(Error::Schema(format!(
                        "{what} network {k} maps {}→{}, expected {i}→{o}",
                        net.in_dim(),
                        net.out_dim()
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn bits(&self) -> usize {
        self.spec.bits()
    }

    pub(crate) fn encoder_forward(
        &self,
        images: &Tensor,
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<(Tensor, pipeline::Cache)> {
        if images.cols() != self.spec.pixels() {
            return Err(Error::shape(&[images.rows(), self.spec.pixels()], images.shape()));
        }
        pipeline::forward(&self.encoder, &self.spec.encoder_steps()?, images, mode, rng)
    }

    pub(crate) fn encoder_backward(
        &self,
        cache: &pipeline::Cache,
        grad: &Tensor,
    ) -> Result<Vec<crate::nncore::Gradients>> {
        Ok(pipeline::backward(&self.encoder, &self.spec.encoder_steps()?, cache, grad)?.0)
    }

    pub(crate) fn decoder_forward(
        &self,
        equalized: &Tensor,
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<(Tensor, pipeline::Cache)> {
        if equalized.cols() != 2 * self.bits() {
            return Err(Error::shape(&[equalized.rows(), 2 * self.bits()], equalized.shape()));
        }
        pipeline::forward(&self.decoder, &self.spec.decoder_steps()?, equalized, mode, rng)
    }

    pub(crate) fn decoder_backward(
        &self,
        cache: &pipeline::Cache,
        grad: &Tensor,
    ) -> Result<(Vec<crate::nncore::Gradients>, Tensor)> {
        pipeline::backward(&self.decoder, &self.spec.decoder_steps()?, cache, grad)
    }

    /// Reconstructed images `[rows × H·W·C]` from equalized rows `[rows × 2d]`.
    pub fn decode_recon(&self, equalized: &Tensor) -> Result<Tensor> {
        Ok(self.decoder_forward(equalized, Mode::Eval, &mut SeededRng::new(0))?.0)
    }
}

/// Continuous bottleneck features `[rows × F]` of a batch of images.
pub fn encode_recon(pair: &ReconPair, images: &Tensor) -> Result<Tensor> {
    Ok(pair.encoder_forward(images, Mode::Eval, &mut SeededRng::new(0))?.0)
}

/// Output of [`quantize_uniform`].
#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    /// `[rows × F·b]` ±1 bits, most significant first per feature.
    pub bits: Tensor,
    /// `[rows × F]` reconstruction levels.
    pub levels: Tensor,
}

fn check_quantizer(b: usize, r: f64) -> Result<()> {
    if !(1..=8).contains(&b) {
        return Err(Error::InvalidParams(format!("quantizer bits {b} outside 1..=8")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParams(format!("quantizer range must be positive, got {r}")));
    }
    Ok(())
}

/// Clips to `[−r, r]` and maps onto `2^b` uniform cells of width
/// `Δ = 2r/2^b`, reconstructing at cell centers.
pub fn quantize_uniform(a: &Tensor, b: usize, r: f64) -> Result<Quantized> {
    check_quantizer(b, r)?;
    a.ensure_finite("quantizer input")?;
    let cells = 1usize << b;
    let delta = 2.0 * r / cells as f64;
    let (rows, f) = (a.rows(), a.cols());
    let mut bits = Vec::with_capacity(rows * f * b);
    let mut levels = Vec::with_capacity(rows * f);
    for &v in a.data() {
        let q = (((v.clamp(-r, r) + r) / delta).floor() as usize).min(cells - 1);
        levels.push(-r + (q as f64 + 0.5) * delta);
        for k in (0..b).rev() {
            bits.push(if q >> k & 1 == 1 { 1.0 } else { -1.0 });
        }
    }
    Ok(Quantized { bits: Tensor::new(vec![rows, f * b], bits)?, levels: Tensor::new(vec![rows, f], levels)? })
}

/// Straight-through backward of [`quantize_uniform`].
///
/// The level is the linear combination `Σ_k w_k·bit_k`, `w_k = Δ·2^(b−1−k)/2`;
/// bit gradients are folded back onto the level through the pseudo-inverse of
/// that map. Inside the clipping range the result passes to the input as is;
/// outside it passes only when descent would move the input back inside, so
/// saturated features can recover.
pub fn quantize_backward(a: &Tensor, b: usize, r: f64, grad_bits: &Tensor) -> Result<Tensor> {
    check_quantizer(b, r)?;
    if grad_bits.shape() != [a.rows(), a.cols() * b] {
        return Err(Error::shape(&[a.rows(), a.cols() * b], grad_bits.shape()));
    }
    let delta = 2.0 * r / (1usize << b) as f64;
    let w: Vec<f64> = (0..b).map(|k| delta * (1usize << (b - 1 - k)) as f64 / 2.0).collect();
    let norm: f64 = w.iter().map(|v| v * v).sum();
    let g = grad_bits.data();
    let out = a
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let gl = (0..b).map(|k| w[k] * g[i * b + k]).sum::<f64>() / norm;
            // Outside the range only a pull back inside passes.
            if (v > r && gl < 0.0) || (v < -r && gl > 0.0) {
                return 0.0;
            }
            gl
        })
        .collect();
    Tensor::new(a.shape().to_vec(), out)
}

impl Transceiver for ReconPair {
    fn bits(&self) -> usize {
        self.spec.bits()
    }

    fn transmit(&self, inputs: &Tensor) -> Result<Tensor> {
        let a = encode_recon(self, inputs)?;
        Ok(quantize_uniform(&a, self.spec.bits_per_feature, self.spec.range)?.bits)
    }

    fn receive(&self, equalized: &Tensor) -> Result<Tensor> {
        self.decode_recon(equalized)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nncore::{DenseParams, LayerSpec};

    fn identity(n: usize) -> NetworkParams {
        let mut p = DenseParams::zeros(n, n);
        for i in 0..n {
            p.weight.data_mut()[i * n + i] = 1.0;
        }
        NetworkParams::from_parts(vec![LayerSpec::dense(n, n)], vec![p]).unwrap()
    }

    fn linear_spec() -> AutoencoderSpec {
        AutoencoderSpec {
            height: 4,
            width: 4,
            channels: 2,
            stages: vec![StageSpec { factor: 2, channels: 8 }],
            features: 32,
            bits_per_feature: 1,
            range: 1.0,
            front_hidden: vec![],
            bounded_input: false,
        }
    }

    /// Linear stages that are exact inverses; the front reads the real half.
    fn identity_pair() -> ReconPair {
        let spec = linear_spec();
        let mut front = DenseParams::zeros(64, 32);
        for i in 0..32 {
            front.weight.data_mut()[i * 64 + i] = 1.0;
        }
        let front = NetworkParams::from_parts(vec![LayerSpec::dense(64, 32)], vec![front]).unwrap();
        ReconPair::from_networks(0, spec, vec![identity(8), identity(32)], vec![front, identity(8)]).unwrap()
    }

    #[test]
    fn linear_inverse_pipeline_is_identity() {
        let pair = identity_pair();
        let mut rng = SeededRng::new(3);
        let s = Tensor::new(vec![3, 32], (0..96).map(|_| rng.uniform()).collect()).unwrap();
        let a = encode_recon(&pair, &s).unwrap();
        assert_eq!(a.shape(), &[3, 32]);
        let mut feats = Tensor::zeros(&[3, 64]);
        for r in 0..3 {
            feats.row_mut(r)[..32].copy_from_slice(a.row(r));
        }
        let back = pair.decode_recon(&feats).unwrap();
        for (x, y) in s.data().iter().zip(back.data()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_image_gives_constant_features() {
        let spec = AutoencoderSpec { stages: vec![StageSpec { factor: 1, channels: 2 }], ..linear_spec() };
        let dec =
            vec![NetworkParams::mlp(&[64, 32], LayerKind::Relu, None, &mut SeededRng::new(0)).unwrap(), identity(2)];
        let pair = ReconPair::from_networks(0, spec, vec![identity(2), identity(32)], dec).unwrap();
        let s = Tensor::new(vec![1, 32], vec![0.25; 32]).unwrap();
        let a = encode_recon(&pair, &s).unwrap();
        assert!(a.data().iter().all(|&v| v == 0.25));
        assert_eq!(a, encode_recon(&pair, &s).unwrap());
    }

    #[test]
    fn default_pair_shapes() {
        let spec = AutoencoderSpec::desk_rgb16();
        let pair = ReconPair::new(1, &spec, &mut SeededRng::new(4)).unwrap();
        let s = Tensor::zeros(&[2, spec.pixels()]);
        assert_eq!(encode_recon(&pair, &s).unwrap().shape(), &[2, 256]);
        let out = pair.decode_recon(&Tensor::zeros(&[2, 1024])).unwrap();
        assert_eq!(out.shape(), &[2, 768]);
        assert!(out.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(pair.transmit(&s).unwrap().shape(), &[2, 512]);
        let bad = AutoencoderSpec { height: 15, ..spec };
        assert!(ReconPair::new(0, &bad, &mut SeededRng::new(4)).is_err());
    }

    #[test]
    fn quantizer_reference_cases() {
        let a = Tensor::new(vec![1, 2], vec![0.7, -0.2]).unwrap();
        let q = quantize_uniform(&a, 1, 1.0).unwrap();
        assert_eq!(q.levels.data(), &[0.5, -0.5]);
        assert_eq!(q.bits.data(), &[1.0, -1.0]);
        // Level centers reconstruct exactly; b = 2, r = 3 has centers ±0.75, ±2.25.
        let c = Tensor::new(vec![1, 4], vec![-2.25, -0.75, 0.75, 2.25]).unwrap();
        let q = quantize_uniform(&c, 2, 3.0).unwrap();
        assert_eq!(q.levels, c);
        assert_eq!(q.bits.data(), &[-1.0, -1.0, -1.0, 1.0, 1.0, -1.0, 1.0, 1.0]);
        assert!(quantize_uniform(&c, 0, 3.0).is_err());
        assert!(quantize_uniform(&c, 9, 3.0).is_err());
        assert!(quantize_uniform(&c, 2, 0.0).is_err());
    }

    #[test]
    fn quantizer_error_bound_on_fine_grid() {
        for b in 1..=8 {
            let r = 2.5;
            let delta = 2.0 * r / (1 << b) as f64;
            let xs: Vec<f64> = (0..=20_000).map(|k| -r + 2.0 * r * k as f64 / 20_000.0).collect();
            let q = quantize_uniform(&Tensor::new(vec![1, xs.len()], xs.clone()).unwrap(), b, r).unwrap();
            for (x, l) in xs.iter().zip(q.levels.data()) {
                assert!((x - l).abs() <= delta / 2.0 + 1e-12, "b={b} x={x}");
            }
        }
    }

    #[test]
    fn levels_are_the_weighted_bit_sum() {
        let (b, r) = (3, 2.0);
        let delta = 2.0 * r / 8.0;
        let a = Tensor::new(vec![1, 5], vec![-1.9, -0.3, 0.1, 1.2, 1.99]).unwrap();
        let q = quantize_uniform(&a, b, r).unwrap();
        for f in 0..5 {
            let sum: f64 = (0..b).map(|k| delta * (1 << (b - 1 - k)) as f64 / 2.0 * q.bits.data()[f * b + k]).sum();
            assert!((sum - q.levels.data()[f]).abs() < 1e-12);
        }
    }

    #[test]
    fn straight_through_gradient() {
        let (b, r) = (2, 3.0);
        let a = Tensor::new(vec![1, 2], vec![0.4, 3.5]).unwrap();
        // A bit gradient equal to the level weights maps to a unit level gradient.
        let delta = 1.5;
        let g = Tensor::new(vec![1, 4], vec![delta, delta / 2.0, 1.0, 1.0]).unwrap();
        let ga = quantize_backward(&a, b, r, &g).unwrap();
        let w2 = delta * delta + delta * delta / 4.0;
        assert!((ga.data()[0] - (delta * delta + delta * delta / 4.0) / w2).abs() < 1e-12);
        // Above the range a positive gradient pulls the input back down.
        assert!((ga.data()[1] - (1.5 + 0.75) / w2).abs() < 1e-12);
        let away = Tensor::new(vec![1, 4], vec![delta, delta / 2.0, -1.0, -1.0]).unwrap();
        assert_eq!(quantize_backward(&a, b, r, &away).unwrap().data()[1], 0.0);
        let below = Tensor::new(vec![1, 2], vec![0.4, -3.5]).unwrap();
        assert!(quantize_backward(&below, b, r, &away).unwrap().data()[1] < 0.0);
        assert_eq!(quantize_backward(&below, b, r, &g).unwrap().data()[1], 0.0);
    }
}
