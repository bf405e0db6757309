use log::info;
use serde::{Deserialize, Serialize};

use super::loss::{rib_gradients, RibBatch};
use super::{count_correct, LabeledDataset, RibConfig, TransceiverPair};
use crate::channel::{sample_channel, PowerAllocation};
use crate::error::{Error, Result};
use crate::link::{mean_score, transmit_all, Route};
use crate::nncore::{AdamConfig, AdamState, SeededRng};
use crate::par::Exec;

/// Stream of the training generator, kept apart from evaluation streams.
const TRAIN_STREAM: u64 = 0x7261_696e;

/// Averages of one user's loss terms and training accuracy over an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub user: usize,
    pub ce: f64,
    pub hyx: f64,
    pub hxs: f64,
    pub total: f64,
    pub accuracy: f64,
}

/// Alternating distributed training. Within each step every user in turn
/// sees a fresh channel realization and noise, all users transmit, and only
/// that user's encoder and decoder are updated.
///
/// Each user walks its own dataset in an independently shuffled order, so
/// the interfering inputs are unrelated to the user's own sample.
pub fn train_distributed(
    pairs: &mut [TransceiverPair],
    datasets: &[&LabeledDataset],
    cfg: &RibConfig,
) -> Result<Vec<EpochMetrics>> {
    cfg.validate()?;
    let n = cfg.users;
    if pairs.len() != n || datasets.len() != n {
        return Err(Error::InvalidParams(format!(
            "{} pairs and {} datasets for {n} users",
            pairs.len(),
            datasets.len()
        )));
    }
    for (p, ds) in pairs.iter().zip(datasets) {
        p.validate()?;
        if ds.dim() != p.encoder.in_dim() || ds.classes > p.classes() {
            return Err(Error::InvalidParams(format!("dataset does not fit user {}", p.index)));
        }
    }
    let v = cfg.batch_size;
    let steps = datasets.iter().map(|d| d.len()).min().unwrap_or(0) / v;
    if steps == 0 {
        return Err(Error::InsufficientData(format!("fewer samples than one batch of {v}")));
    }
    let pw = PowerAllocation::new(cfg.powers.clone())?;
    let noise_var = pw.noise_for_snr_db(cfg.train_snr_db);
    let adam_cfg = AdamConfig { lr: cfg.learning_rate, ..AdamConfig::default() };
    let mut enc_opt: Vec<AdamState> = pairs.iter().map(|p| AdamState::new(&p.encoder, adam_cfg)).collect();
    let mut dec_opt: Vec<AdamState> = pairs.iter().map(|p| AdamState::new(&p.decoder, adam_cfg)).collect();
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
        let mut sums = vec![[0.0f64; 4]; n];
        let mut correct = vec![0usize; n];
        let mut rows = vec![0usize; n];
        for step in 0..steps {
            let batches: Vec<LabeledDataset> =
                datasets.iter().zip(&orders).map(|(ds, o)| ds.subset(&o[step * v..(step + 1) * v])).collect();
            let inputs: Vec<_> = batches.iter().map(|b| b.samples.clone()).collect();
            for i in 0..n {
                let mut rng = epoch_rng.fork((step * n + i) as u64);
                let ch = sample_channel(n, pairs[i].bits, &noise_var, &mut rng)?;
                let batch = RibBatch {
                    inputs: &inputs,
                    labels: &batches[i].labels,
                    noise_samples: cfg.noise_samples,
                    with_interference: cfg.train_with_interference,
                };
                let out = rib_gradients(pairs, i, &batch, &ch, &pw, &mut rng).map_err(|e| match e {
                    Error::NonFinite(detail) => Error::Divergence { epoch, user: i, detail },
                    other => other,
                })?;
                let t = out.terms;
                for (s, x) in sums[i].iter_mut().zip([t.ce, t.hyx, t.hxs, t.total]) {
                    *s += x;
                }
                correct[i] += out.correct;
                rows[i] += out.rows;
                let pair = &mut pairs[i];
                enc_opt[i].step(&mut pair.encoder, &out.encoder)?;
                dec_opt[i].step(&mut pair.decoder, &out.decoder)?;
            }
        }
        for i in 0..n {
            let s = sums[i].map(|x| x / steps as f64);
            let m = EpochMetrics {
                epoch,
                user: i,
                ce: s[0],
                hyx: s[1],
                hxs: s[2],
                total: s[3],
                accuracy: correct[i] as f64 / rows[i] as f64,
            };
            info!(
                "epoch {epoch} user {i}: ce {:.4} hyx {:.4} hxs {:.4} total {:.4} acc {:.4}",
                m.ce, m.hyx, m.hxs, m.total, m.accuracy
            );
            log.push(m);
        }
    }
    Ok(log)
}

/// Accuracy of every receiver on `dataset` (all users transmit the same
/// inputs) under fresh channel and noise draws per batch and trial.
pub fn evaluate_accuracy(
    pairs: &[TransceiverPair],
    dataset: &LabeledDataset,
    snr_db: f64,
    pw: &PowerAllocation,
    trials: usize,
    rng: &SeededRng,
    exec: Exec,
) -> Result<Vec<f64>> {
    let symbols = transmit_all(pairs, &dataset.samples)?;
    accuracy_row(pairs, &symbols, dataset, snr_db, pw, trials, rng, exec, None)
}

/// Per-receiver accuracy. With `interferer = Some(f)`, receiver `i` sees only
/// TX `f(i)`'s signal, noise-free.
#[allow(clippy::too_many_arguments)]
pub(crate) fn accuracy_row(
    pairs: &[TransceiverPair],
    symbols: &[crate::nncore::Tensor],
    dataset: &LabeledDataset,
    snr_db: f64,
    pw: &PowerAllocation,
    trials: usize,
    rng: &SeededRng,
    exec: Exec,
    interferer: Option<&dyn Fn(usize) -> usize>,
) -> Result<Vec<f64>> {
    let labels = &dataset.labels;
    let score = |post: &crate::nncore::Tensor, start: usize| -> Result<f64> {
        Ok(count_correct(post, &labels[start..start + post.rows()]) as f64)
    };
    (0..pairs.len())
        .map(|rx| {
            let route = match interferer {
                Some(f) => Route::InterferenceOnly(f(rx)),
                None => Route::Received,
            };
            mean_score(pairs, symbols, rx, route, snr_db, pw, trials, rng, exec, &score)
        })
        .collect()
}
