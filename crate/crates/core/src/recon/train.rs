use log::info;
use serde::{Deserialize, Serialize};

use super::metrics::{max_scales, ms_ssim, ms_ssim_if_fits, mse_slices, psnr_from_mse, ReconMetrics};
use super::{quantize_backward, quantize_uniform, ImageSet, ImageTensor, ReconPair};
use crate::channel::{equalized_batch, sample_channel, BatchNoise, Include, PowerAllocation};
use crate::error::{Error, Result};
use crate::link::{mean_score, transmit_all, Route};
use crate::nncore::{AdamConfig, AdamState, Gradients, Mode, SeededRng, Tensor};
use crate::par::Exec;

const TRAIN_STREAM: u64 = 0x7265_636f;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    pub users: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub train_snr_db: f64,
    pub powers: Vec<f64>,
    pub seed: u64,
    pub learning_rate: f64,
    /// When false, receivers see only their own signal during training.
    pub train_with_interference: bool,
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParams("N, V and T must all be ≥ 1".into()));
        }
        if self.powers.len() != self.users {
            return Err(Error::InvalidParams(format!("{} powers for {} users", self.powers.len(), self.users)));
        }
        if !(self.learning_rate > 0.0) || !self.train_snr_db.is_finite() {
            return Err(Error::InvalidParams("learning rate must be positive and SNR finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconEpochMetrics {
    pub epoch: usize,
    pub user: usize,
    pub mse: f64,
    pub psnr: f64,
    pub ms_ssim: Option<f64>,
}

/// Mean squared error over every pixel of the batch.
pub fn recon_mse_loss(recon: &Tensor, target: &Tensor) -> Result<f64> {
    recon.same_shape(target)?;
    Ok(mse_slices(recon.data(), target.data()))
}

fn row_image(t: &Tensor, r: usize, shape: [usize; 3]) -> Result<ImageTensor> {
    ImageTensor::new(shape[0], shape[1], shape[2], t.row(r).to_vec())
}

/// Train-mode decoder pass with its MSE loss against `target`, the
/// parameter gradients and the gradient with respect to `equalized`.
fn decoder_step(
    pair: &ReconPair,
    equalized: &Tensor,
    target: &Tensor,
    rng: &mut SeededRng,
) -> Result<(Tensor, f64, Vec<Gradients>, Tensor)> {
    let (out, cache) = pair.decoder_forward(equalized, Mode::Train, rng)?;
    let loss = recon_mse_loss(&out, target)?;
    let scale = 2.0 / out.len() as f64;
    let grad_out = Tensor::new(
        out.shape().to_vec(),
        out.data().iter().zip(target.data()).map(|(x, y)| scale * (x - y)).collect(),
    )?;
    let (grads, g_eq) = pair.decoder_backward(&cache, &grad_out)?;
    Ok((out, loss, grads, g_eq))
}

/// MSE of the decoded `equalized` rows against `target`, with gradients for
/// every decoder network and for `equalized`.
pub fn decoder_mse_gradients(
    pair: &ReconPair,
    equalized: &Tensor,
    target: &Tensor,
) -> Result<(f64, Vec<Gradients>, Tensor)> {
    let (_, loss, grads, g_eq) = decoder_step(pair, equalized, target, &mut SeededRng::new(0))?;
    Ok((loss, grads, g_eq))
}

/// Continuous features of `images` and the encoder gradients of
/// `Σ features ⊙ grad_features`.
pub fn encoder_feature_gradients(
    pair: &ReconPair,
    images: &Tensor,
    grad_features: &Tensor,
) -> Result<(Tensor, Vec<Gradients>)> {
    let (a, cache) = pair.encoder_forward(images, Mode::Train, &mut SeededRng::new(0))?;
    a.same_shape(grad_features)?;
    let grads = pair.encoder_backward(&cache, grad_features)?;
    Ok((a, grads))
}

/// Alternating per-user MSE training over the same link as the
/// classification track. Each user walks its own shuffled image order.
pub fn train_recon(
    pairs: &mut [ReconPair],
    datasets: &[&ImageSet],
    cfg: &ReconConfig,
) -> Result<Vec<ReconEpochMetrics>> {
    cfg.validate()?;
    let n = cfg.users;
    if pairs.len() != n || datasets.len() != n {
        return Err(Error::InvalidParams(format!(
            "{} pairs and {} datasets for {n} users",
            pairs.len(),
            datasets.len()
        )));
    }
    let d = pairs[0].bits();
    for (p, ds) in pairs.iter().zip(datasets) {
        p.validate()?;
        if p.bits() != d {
            return Err(Error::InvalidParams("all users must share the block length".into()));
        }
        if ds.shape() != [p.spec.height, p.spec.width, p.spec.channels] {
            return Err(Error::shape(&[p.spec.height, p.spec.width, p.spec.channels], &ds.shape()));
        }
    }
    let v = cfg.batch_size;
    let steps = datasets.iter().map(|d| d.len()).min().unwrap_or(0) / v;
    if steps == 0 {
        return Err(Error::InsufficientData(format!("fewer images than one batch of {v}")));
    }
    let pw = PowerAllocation::new(cfg.powers.clone())?;
    let noise_var = pw.noise_for_snr_db(cfg.train_snr_db);
    let adam_cfg = AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() };
    let mut enc_opt: Vec<Vec<AdamState>> =
        pairs.iter().map(|p| p.encoder.iter().map(|net| AdamState::new(net, adam_cfg)).collect()).collect();
    let mut dec_opt: Vec<Vec<AdamState>> =
        pairs.iter().map(|p| p.decoder.iter().map(|net| AdamState::new(net, adam_cfg)).collect()).collect();
    let root = SeededRng::with_stream(cfg.seed, TRAIN_STREAM);
    let mut log = Vec::with_capacity(cfg.epochs * n);

    for epoch in 0..cfg.epochs {
        let epoch_rng = root.fork(epoch as u64);
        let orders: Vec<Vec<usize>> = datasets
            .iter()
            .enumerate()
            .map(|(j, ds)| {
                let mut idx: Vec<usize> = (0..ds.len()).collect();
                epoch_rng.fork((1 << 32) + j as u64).shuffle(&mut idx);
                idx
            })
            .collect();
        let mut sums = vec![[0.0f64; 3]; n];
        let mut images = vec![0usize; n];
        for step in 0..steps {
            let inputs: Vec<Tensor> =
                datasets.iter().zip(&orders).map(|(ds, o)| ds.batch(&o[step * v..(step + 1) * v])).collect();
            for i in 0..n {
                let mut rng = epoch_rng.fork((step * n + i) as u64);
                let ch = sample_channel(n, d, &noise_var, &mut rng)?;
                let me = &pairs[i];
                let (b, r) = (me.spec.bits_per_feature, me.spec.range);
                let mut symbols = vec![Tensor::zeros(&[v, d]); n];
                let (a, enc_cache) = me.encoder_forward(&inputs[i], Mode::Train, &mut rng)?;
                symbols[i] = quantize_uniform(&a, b, r)?.bits;
                if cfg.train_with_interference {
                    for j in (0..n).filter(|&j| j != i) {
                        symbols[j] = crate::link::Transceiver::transmit(&pairs[j], &inputs[j])?;
                    }
                }
                let noise = BatchNoise::draw(v, d, noise_var[i], &mut rng);
                let refs: Vec<&Tensor> = symbols.iter().collect();
                let include = if cfg.train_with_interference { Include::All } else { Include::OwnOnly };
                let eq = equalized_batch(i, &refs, &ch, &pw, include, Some(&noise))?;
                let (out, loss, dec_grads, g_eq) = decoder_step(me, &eq, &inputs[i], &mut rng)?;
                if !loss.is_finite() {
                    return Err(Error::Divergence { epoch, user: i, detail: format!("mse {loss}") });
                }
                let shape = datasets[i].shape();
                for q in 0..v {
                    let (x, y) = (row_image(&out, q, shape)?, row_image(&inputs[i], q, shape)?);
                    let m = mse_slices(&x.data, &y.data);
                    sums[i][0] += m;
                    sums[i][1] += psnr_from_mse(m);
                    sums[i][2] += ms_ssim_if_fits(&x, &y)?.unwrap_or(0.0);
                }
                images[i] += v;

                let amp = pw.get(i).sqrt();
                let mut g_bits = Tensor::zeros(&[v, d]);
                for q in 0..v {
                    for (o, s) in g_bits.row_mut(q).iter_mut().zip(&g_eq.row(q)[..d]) {
                        *o = amp * s;
                    }
                }
                let g_a = quantize_backward(&a, b, r, &g_bits)?;
                let enc_grads = me.encoder_backward(&enc_cache, &g_a)?;
                let pair = &mut pairs[i];
                for ((net, opt), g) in pair.encoder.iter_mut().zip(&mut enc_opt[i]).zip(&enc_grads) {
                    opt.step(net, g)?;
                }
                for ((net, opt), g) in pair.decoder.iter_mut().zip(&mut dec_opt[i]).zip(&dec_grads) {
                    opt.step(net, g)?;
                }
            }
        }
        let fits = max_scales(datasets[0].shape()[0], datasets[0].shape()[1]) > 0;
        for i in 0..n {
            let k = images[i] as f64;
            let m = ReconEpochMetrics {
                epoch,
                user: i,
                mse: sums[i][0] / k,
                psnr: sums[i][1] / k,
                ms_ssim: fits.then(|| sums[i][2] / k),
            };
            info!("epoch {epoch} user {i}: mse {:.5} psnr {:.2} dB ms-ssim {:?}", m.mse, m.psnr, m.ms_ssim);
            log.push(m);
        }
    }
    Ok(log)
}

/// Which per-image quantity [`recon_metric_row`] averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ImageMetric {
    Mse,
    Psnr,
    MsSsim,
}

/// Per-receiver mean image metric; with `interferer`, receiver `i` sees only
/// TX `f(i)`'s noise-free signal.
#[allow(clippy::too_many_arguments)]
pub(crate) fn recon_metric_row(
    pairs: &[ReconPair],
    symbols: &[Tensor],
    images: &ImageSet,
    snr_db: f64,
    pw: &PowerAllocation,
    trials: usize,
    rng: &SeededRng,
    exec: Exec,
    metric: ImageMetric,
    interferer: Option<&dyn Fn(usize) -> usize>,
) -> Result<Vec<f64>> {
    let shape = images.shape();
    let score = |out: &Tensor, start: usize| -> Result<f64> {
        let mut acc = 0.0;
        for q in 0..out.rows() {
            let x = row_image(out, q, shape)?;
            let y = &images.images[start + q];
            acc += match metric {
                ImageMetric::Mse => mse_slices(&x.data, &y.data),
                ImageMetric::Psnr => psnr_from_mse(mse_slices(&x.data, &y.data)),
                ImageMetric::MsSsim => ms_ssim(&x, y)?,
            };
        }
        Ok(acc)
    };
    (0..pairs.len())
        .map(|rx| {
            let route = interferer.map_or(Route::Received, |f| Route::InterferenceOnly(f(rx)));
            mean_score(pairs, symbols, rx, route, snr_db, pw, trials, rng, exec, &score)
        })
        .collect()
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn psnr_row(
    pairs: &[ReconPair],
    symbols: &[Tensor],
    images: &ImageSet,
    snr_db: f64,
    pw: &PowerAllocation,
    trials: usize,
    rng: &SeededRng,
    exec: Exec,
    interferer: Option<&dyn Fn(usize) -> usize>,
) -> Result<Vec<f64>> {
    recon_metric_row(pairs, symbols, images, snr_db, pw, trials, rng, exec, ImageMetric::Psnr, interferer)
}

/// Mean per-image MSE, PSNR and MS-SSIM of every receiver (all users send
/// the same images) under fresh channel and noise draws.
pub fn evaluate_recon(
    pairs: &[ReconPair],
    images: &ImageSet,
    snr_db: f64,
    pw: &PowerAllocation,
    trials: usize,
    rng: &SeededRng,
    exec: Exec,
) -> Result<Vec<ReconMetrics>> {
    let symbols = transmit_all(pairs, &images.to_tensor())?;
    let row = |m| recon_metric_row(pairs, &symbols, images, snr_db, pw, trials, rng, exec, m, None);
    let (mse, psnr) = (row(ImageMetric::Mse)?, row(ImageMetric::Psnr)?);
    let [h, w, _] = images.shape();
    let ssim = if max_scales(h, w) > 0 { Some(row(ImageMetric::MsSsim)?) } else { None };
    Ok((0..pairs.len())
        .map(|i| ReconMetrics { mse: mse[i], psnr: psnr[i], ms_ssim: ssim.as_ref().map(|s| s[i]) })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{AutoencoderSpec, StageSpec};

    fn ramps(n: usize, rng: &mut SeededRng) -> ImageSet {
        let images = (0..n)
            .map(|_| {
                let t = rng.uniform() * std::f64::consts::TAU;
                let (c, s) = (t.cos(), t.sin());
                let raw: Vec<f64> = (0..64).map(|k| c * (k % 8) as f64 + s * (k / 8) as f64).collect();
                let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| (a.0.min(v), a.1.max(v)));
                ImageTensor::new(8, 8, 1, raw.iter().map(|v| (v - lo) / (hi - lo)).collect()).unwrap()
            })
            .collect();
        ImageSet::new(images).unwrap()
    }

    fn small_spec() -> AutoencoderSpec {
        AutoencoderSpec {
            height: 8,
            width: 8,
            channels: 1,
            stages: vec![StageSpec { factor: 2, channels: 8 }],
            features: 8,
            bits_per_feature: 2,
            range: 3.0,
            front_hidden: vec![],
            bounded_input: false,
        }
    }

    fn cfg(users: usize) -> ReconConfig {
        ReconConfig {
            users,
            batch_size: 16,
            epochs: 2,
            train_snr_db: 10.0,
            powers: vec![1.0; users],
            seed: 4,
            learning_rate: 2e-3,
            train_with_interference: true,
        }
    }

    #[test]
    fn fixed_seed_gives_identical_log() {
        let mut rng = SeededRng::new(8);
        let ds = ramps(64, &mut rng);
        let start: Vec<ReconPair> = (0..2).map(|i| ReconPair::new(i, &small_spec(), &mut rng).unwrap()).collect();
        let (mut a, mut b) = (start.clone(), start);
        let la = train_recon(&mut a, &[&ds, &ds], &cfg(2)).unwrap();
        let lb = train_recon(&mut b, &[&ds, &ds], &cfg(2)).unwrap();
        assert_eq!(la, lb);
        assert_eq!(a, b);
        assert!(la.iter().all(|m| m.psnr.is_finite() && m.ms_ssim.is_none()));
    }

    #[test]
    fn loss_matches_metric_mse() {
        let mut rng = SeededRng::new(1);
        let ds = ramps(2, &mut rng);
        let (x, y) = (&ds.images[0], &ds.images[1]);
        let loss = recon_mse_loss(&ds.batch(&[0]), &ds.batch(&[1])).unwrap();
        assert!((loss - ReconMetrics::between(x, y).unwrap().mse).abs() < 1e-12);
    }
}
