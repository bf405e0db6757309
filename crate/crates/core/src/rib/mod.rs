//! Classification track: per-user binary-bottleneck encoders, variational
//! decoders, the three-term Monte-Carlo objective and distributed training.

mod loss;
mod train;

pub use loss::{channel_entropy, entropy_logit_grad, rib_gradients, rib_loss, RibBatch, RibGradients, RibLossTerms};
pub(crate) use train::accuracy_row;
pub use train::{evaluate_accuracy, train_distributed, EpochMetrics};

use serde::{Deserialize, Serialize};

use crate::channel::{modulate_bpsk, normalize_power, ComplexBlock};
use crate::error::{Error, Result};
use crate::link::Transceiver;
use crate::nncore::{hard_sign, sigmoid, LayerKind, LayerSpec, Mode, NetworkParams, SeededRng, Tensor};

/// Samples `[n × dim]` with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Tensor,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledDataset {
    pub fn new(samples: Tensor, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if samples.shape().len() != 2 || samples.rows() != labels.len() {
            return Err(Error::shape(&[labels.len()], samples.shape()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidParams(format!("label {bad} outside {classes} classes")));
        }
        Ok(LabeledDataset { samples, labels, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledDataset {
        LabeledDataset {
            samples: self.samples.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    /// The first `n` samples (or all, if fewer).
    pub fn head(&self, n: usize) -> LabeledDataset {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.subset(&idx)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RibArchitecture {
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    /// Pass the equalized signal through `tanh` before the first dense
    /// layer. Zero-forcing divides by `g_ii`, so deep fades give unbounded
    /// inputs.
    pub bounded_input: bool,
}

impl Default for RibArchitecture {
    fn default() -> Self {
        RibArchitecture { encoder_hidden: vec![512, 256], decoder_hidden: vec![256, 128], bounded_input: true }
    }
}

/// Training hyperparameters shared by all users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RibConfig {
    pub users: usize,
    /// Mini-batch size V.
    pub batch_size: usize,
    /// Noise/bottleneck samples L per example.
    pub noise_samples: usize,
    pub epochs: usize,
    pub train_snr_db: f64,
    pub powers: Vec<f64>,
    pub seed: u64,
    pub learning_rate: f64,
    /// When false, receivers see only their own signal during training.
    pub train_with_interference: bool,
}

impl RibConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users == 0 || self.batch_size == 0 || self.noise_samples == 0 || self.epochs == 0 {
            return Err(Error::InvalidParams("N, V, L and T must all be ≥ 1".into()));
        }
        if self.powers.len() != self.users {
            return Err(Error::InvalidParams(format!("{} powers given for {} users", self.powers.len(), self.users)));
        }
        if !(self.learning_rate > 0.0) || !self.train_snr_db.is_finite() {
            return Err(Error::InvalidParams("learning rate must be positive and SNR finite".into()));
        }
        Ok(())
    }
}

/// Encoder `p_ψ(x|s)` and decoder `q_θ(u|ŷ)` of one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransceiverPair {
    pub index: usize,
    pub bits: usize,
    pub lambda: f64,
    pub encoder: NetworkParams,
    pub decoder: NetworkParams,
}

/// Output of [`TransceiverPair::encode`] for a batch.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub logits: Tensor,
    /// `σ(logit)`, the probability of a +1 bit.
    pub probs: Tensor,
    /// ±1 bits.
    pub bits: Tensor,
    /// Real parts of the normalized BPSK blocks (imaginary parts are zero).
    pub symbols: Tensor,
}

impl TransceiverPair {
    /// Fresh pair: encoder `in → hidden… → d` ending in the binary
    /// bottleneck, decoder `2d → hidden… → classes` ending in softmax.
    pub fn new(
        index: usize,
        input_dim: usize,
        classes: usize,
        bits: usize,
        lambda: f64,
        arch: &RibArchitecture,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParams(format!("λ must be ≥ 0, got {lambda}")));
        }
        let mut enc_dims = vec![input_dim];
        enc_dims.extend(&arch.encoder_hidden);
        enc_dims.push(bits);
        let mut dec_dims = vec![2 * bits];
        dec_dims.extend(&arch.decoder_hidden);
        dec_dims.push(classes);
        let encoder = NetworkParams::mlp(&enc_dims, LayerKind::Relu, Some(LayerKind::SignSte), rng)?;
        let mut dec_layers = Vec::new();
        if arch.bounded_input {
            dec_layers.push(LayerSpec::elementwise(LayerKind::Tanh, 2 * bits));
        }
        dec_layers.extend(NetworkParams::mlp_layers(&dec_dims, LayerKind::Relu, Some(LayerKind::Softmax))?);
        let decoder = NetworkParams::new(dec_layers, rng)?;
        TransceiverPair::from_networks(index, bits, lambda, encoder, decoder)
    }

    pub fn from_networks(
        index: usize,
        bits: usize,
        lambda: f64,
        encoder: NetworkParams,
        decoder: NetworkParams,
    ) -> Result<Self> {
        let pair = TransceiverPair { index, bits, lambda, encoder, decoder };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        self.decoder.validate()?;
        let last = self.encoder.layers().last().unwrap();
        if last.kind != LayerKind::SignSte || self.encoder.out_dim() != self.bits {
            return Err(Error::Schema(format!("encoder must end in a {}-bit sign bottleneck", self.bits)));
        }
        if self.decoder.in_dim() != 2 * self.bits {
            return Err(Error::Schema(format!("decoder input must be 2d = {}", 2 * self.bits)));
        }
        if self.decoder.layers().last().unwrap().kind != LayerKind::Softmax {
            return Err(Error::Schema("decoder must end in softmax".into()));
        }
        Ok(())
    }

    pub fn classes(&self) -> usize {
        self.decoder.out_dim()
    }

    /// Encodes a batch `[rows × in]`.
    pub fn encode(&self, s: &Tensor, rng: &mut SeededRng, mode: Mode) -> Result<Encoded> {
        let last = self.encoder.layers().len() - 1;
        let (logits, bits) = match mode {
            Mode::Eval => {
                let logits = self.encoder.infer_until(s, last)?;
                let bits = logits.map(hard_sign);
                (logits, bits)
            }
            Mode::Train => {
                let fwd = self.encoder.forward(s, rng, mode)?;
                (fwd.activation(last).expect("train mode caches").clone(), fwd.into_output())
            }
        };
        self.encoded_from(logits, bits)
    }

    fn encoded_from(&self, logits: Tensor, bits: Tensor) -> Result<Encoded> {
        let probs = logits.map(sigmoid);
        let mut sym = Vec::with_capacity(bits.len());
        for r in 0..bits.rows() {
            let block = normalize_power(&modulate_bpsk(bits.row(r))?)?;
            sym.extend(block.0.iter().map(|z| z.re));
        }
        let symbols = Tensor::new(bits.shape().to_vec(), sym)?;
        Ok(Encoded { logits, probs, bits, symbols })
    }

    /// Class posterior for equalized rows `[rows × 2d]` laid out `[re; im]`.
    pub fn decode(&self, equalized: &Tensor) -> Result<Tensor> {
        self.decoder.infer(equalized)
    }

    pub fn decode_block(&self, yhat: &ComplexBlock) -> Result<Vec<f64>> {
        if yhat.len() != self.bits {
            return Err(Error::shape(&[self.bits], &[yhat.len()]));
        }
        let x = Tensor::new(vec![1, 2 * self.bits], yhat.to_features())?;
        Ok(self.decode(&x)?.into_data())
    }
}

impl Transceiver for TransceiverPair {
    fn bits(&self) -> usize {
        self.bits
    }

    fn transmit(&self, inputs: &Tensor) -> Result<Tensor> {
        let mut rng = SeededRng::new(0);
        Ok(self.encode(inputs, &mut rng, Mode::Eval)?.symbols)
    }

    fn receive(&self, equalized: &Tensor) -> Result<Tensor> {
        self.decode(equalized)
    }
}

/// Number of rows whose arg-max matches the label.
pub fn count_correct(posterior: &Tensor, labels: &[usize]) -> usize {
    (0..posterior.rows())
        .filter(|&r| {
            let row = posterior.row(r);
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (k, &v)| if v > acc.1 { (k, v) } else { acc });
            best.0 == labels[r]
        })
        .count()
}
