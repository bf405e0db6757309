//! Monte-Carlo estimate of the three-term objective for one user and its
//! gradients.
//!
//! Random draws are consumed in a fixed order: the train-mode encoders of
//! the transmitting users in index order (one logistic draw per bit), then
//! the receiver noise `[V·L × d]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{count_correct, TransceiverPair};
use crate::channel::{cond_output_entropy, equalized_batch, BatchNoise, ChannelRealization, Include, PowerAllocation};
use crate::error::{Error, Result};
use crate::nncore::{binary_entropy_logit, sigmoid, Gradients, Mode, SeededRng, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RibLossTerms {
    pub ce: f64,
    pub hyx: f64,
    pub hxs: f64,
    pub total: f64,
}

impl RibLossTerms {
    pub fn new(ce: f64, hyx: f64, hxs: f64) -> Self {
        RibLossTerms { ce, hyx, hxs, total: ce + hyx - hxs }
    }

    pub fn is_finite(&self) -> bool {
        self.ce.is_finite() && self.hyx.is_finite() && self.hxs.is_finite() && self.total.is_finite()
    }
}

/// One mini-batch as seen by every user: `inputs[j]` is TX `j`'s `[V × in]`
/// batch, `labels` the targets of the user being optimized.
#[derive(Debug, Clone, Copy)]
pub struct RibBatch<'a> {
    pub inputs: &'a [Tensor],
    pub labels: &'a [usize],
    /// Bottleneck/noise samples L per example.
    pub noise_samples: usize,
    pub with_interference: bool,
}

#[derive(Debug, Clone)]
pub struct RibGradients {
    pub terms: RibLossTerms,
    pub encoder: Gradients,
    pub decoder: Gradients,
    /// Argmax-correct rows among the `V·L` evaluated rows.
    pub correct: usize,
    pub rows: usize,
}

/// Loss terms of user `user` for one batch and channel realization.
pub fn rib_loss(
    pairs: &[TransceiverPair],
    user: usize,
    batch: &RibBatch<'_>,
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    rng: &mut SeededRng,
) -> Result<RibLossTerms> {
    Ok(pass(pairs, user, batch, ch, pw, rng, false)?.terms)
}

/// Loss terms plus gradients for `(ψ_i, θ_i)`. The sampled bits pass the
/// gradient of their mean `2σ(z) − 1` (a sigmoid-scaled straight-through
/// rule); the encoder-entropy term is differentiated exactly through the
/// logits.
pub fn rib_gradients(
    pairs: &[TransceiverPair],
    user: usize,
    batch: &RibBatch<'_>,
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    rng: &mut SeededRng,
) -> Result<RibGradients> {
    pass(pairs, user, batch, ch, pw, rng, true)
}

/// Gradient of `−hxs` with respect to the bottleneck logits `[rows × d]`.
pub fn entropy_logit_grad(logits: &Tensor, lambda: f64) -> Tensor {
    // dH_b(σ(z))/dz = −z σ(z)(1 − σ(z))
    let scale = lambda / logits.rows() as f64;
    logits.map(|z| {
        let p = sigmoid(z);
        scale * z * p * (1.0 - p)
    })
}

/// Channel-entropy term `Σ_r H(Y_r | x_r)` for receiver `user`. The
/// conditional entropy only depends on the mixture shape, not on where the
/// own symbol sits, so one evaluation per dimension serves every row.
pub fn channel_entropy(
    user: usize,
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    with_interference: bool,
) -> Result<f64> {
    let noise_var = ch.noise_var()[user];
    let amp = pw.get(user).sqrt();
    let mut acc = 0.0;
    for r in 0..ch.dim() {
        let own = ch.gain(user, user).0[r] * amp;
        let intf: Vec<(f64, Complex64)> = if with_interference {
            (0..ch.users()).filter(|&j| j != user).map(|j| (pw.get(j), ch.gain(user, j).0[r])).collect()
        } else {
            Vec::new()
        };
        acc += cond_output_entropy(own, &intf, noise_var)?;
    }
    Ok(acc)
}

fn repeat_rows(t: &Tensor, times: usize) -> Tensor {
    if times == 1 {
        return t.clone();
    }
    let idx: Vec<usize> = (0..t.rows()).flat_map(|v| std::iter::repeat_n(v, times)).collect();
    t.select_rows(&idx)
}

fn pass(
    pairs: &[TransceiverPair],
    user: usize,
    batch: &RibBatch<'_>,
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    rng: &mut SeededRng,
    want_grads: bool,
) -> Result<RibGradients> {
    let n = pairs.len();
    if user >= n || batch.inputs.len() != n || ch.users() != n || pw.0.len() != n {
        return Err(Error::InvalidParams(format!("user {user}, {n} pairs and the channel must agree")));
    }
    let d = pairs[user].bits;
    if pairs.iter().any(|p| p.bits != d) || ch.dim() != d {
        return Err(Error::InvalidParams("all users and the channel must share d".into()));
    }
    let v = batch.labels.len();
    if v == 0 || batch.noise_samples == 0 {
        return Err(Error::InvalidParams("V and L must be ≥ 1".into()));
    }
    if batch.inputs.iter().any(|x| x.rows() != v) {
        return Err(Error::InvalidParams("every user's batch must have V rows".into()));
    }
    let l = batch.noise_samples;
    let rows = v * l;
    let me = &pairs[user];

    let mut symbols = vec![Tensor::zeros(&[rows, d]); n];
    let mut own_fwd = None;
    let mut own_logits = None;
    for j in 0..n {
        if j != user && !batch.with_interference {
            continue;
        }
        let x = repeat_rows(&batch.inputs[j], l);
        if j == user {
            let fwd = me.encoder.forward(&x, rng, Mode::Train)?;
            let last = me.encoder.layers().len() - 1;
            own_logits = Some(fwd.activation(last).expect("train mode caches").clone());
            symbols[j] = fwd.output().clone();
            own_fwd = Some(fwd);
        } else {
            symbols[j] = pairs[j].encode(&x, rng, Mode::Train)?.symbols;
        }
    }
    let own_fwd = own_fwd.expect("own encoder ran");
    let logits = own_logits.expect("own encoder ran");
    let noise = BatchNoise::draw(rows, d, ch.noise_var()[user], rng);
    let refs: Vec<&Tensor> = symbols.iter().collect();
    let include = if batch.with_interference { Include::All } else { Include::OwnOnly };
    let eq = equalized_batch(user, &refs, ch, pw, include, Some(&noise))?;

    let labels: Vec<usize> = batch.labels.iter().flat_map(|&u| std::iter::repeat_n(u, l)).collect();
    if let Some(&bad) = labels.iter().find(|&&u| u >= me.classes()) {
        return Err(Error::InvalidParams(format!("label {bad} outside {} classes", me.classes())));
    }
    let mut drng = SeededRng::new(0);
    let dec_fwd = me.decoder.forward(&eq, &mut drng, Mode::Train)?;
    let post = dec_fwd.output();
    let ce =
        labels.iter().enumerate().map(|(q, &u)| -post.row(q)[u].max(f64::MIN_POSITIVE).ln()).sum::<f64>() / rows as f64;
    let hyx = me.lambda * channel_entropy(user, ch, pw, batch.with_interference)?;
    let hxs = me.lambda * logits.data().iter().map(|&z| binary_entropy_logit(z)).sum::<f64>() / rows as f64;
    let terms = RibLossTerms::new(ce, hyx, hxs);
    if !terms.is_finite() {
        return Err(Error::NonFinite(format!("loss terms {terms:?}")));
    }
    let correct = count_correct(post, &labels);
    if !want_grads {
        return Ok(RibGradients { terms, encoder: Vec::new(), decoder: Vec::new(), correct, rows });
    }

    // Fused softmax + cross-entropy: d ce / d logits = (q − onehot) / rows.
    let mut g = post.clone();
    for (q, &u) in labels.iter().enumerate() {
        g.row_mut(q)[u] -= 1.0;
    }
    for v in g.data_mut() {
        *v /= rows as f64;
    }
    let last = me.decoder.layers().len() - 1;
    let (dec_grads, g_eq) = me.decoder.backward_from(&dec_fwd, last, &g)?;

    // ŷ_r = √p_i x_r + …, so ∂ŷ_r/∂x_r = √p_i on the real part only. An
    // identity straight-through rule lets unreliable bits saturate and die
    // at low SNR.
    let amp = pw.get(user).sqrt();
    let ent = entropy_logit_grad(&logits, me.lambda);
    let mut g_logit = ent;
    for q in 0..rows {
        let src = &g_eq.row(q)[..d];
        let zs = logits.row(q);
        for ((o, s), z) in g_logit.row_mut(q).iter_mut().zip(src).zip(zs) {
            let p = sigmoid(*z);
            *o += amp * s * 2.0 * p * (1.0 - p);
        }
    }
    let enc_last = me.encoder.layers().len() - 1;
    let (enc_grads, _) = me.encoder.backward_from(&own_fwd, enc_last, &g_logit)?;
    Ok(RibGradients { terms, encoder: enc_grads, decoder: dec_grads, correct, rows })
}
