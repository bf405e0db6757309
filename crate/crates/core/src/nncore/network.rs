use serde::{Deserialize, Serialize};

use super::rng::SeededRng;
use super::tensor::{matmul, matmul_at_acc, matmul_bt, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Relu,
    Sigmoid,
    Softmax,
    Tanh,
    /// Binary bottleneck: outputs ±1. The backward pass treats the output as
    /// `2σ(z) − 1`, i.e. scales the incoming gradient by `2σ(z)(1 − σ(z))`.
    SignSte,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl LayerSpec {
    pub fn dense(in_dim: usize, out_dim: usize) -> Self {
        LayerSpec { kind: LayerKind::Dense, in_dim, out_dim }
    }

    pub fn elementwise(kind: LayerKind, dim: usize) -> Self {
        LayerSpec { kind, in_dim: dim, out_dim: dim }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Weight `[out, in]` and bias `[out]` of one dense layer. Also used for
/// gradients and optimizer moments, which share the layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DenseParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl DenseParams {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        DenseParams { weight: Tensor::zeros(&[out_dim, in_dim]), bias: Tensor::zeros(&[out_dim]) }
    }

    fn zeros_like(&self) -> Self {
        DenseParams { weight: Tensor::zeros(self.weight.shape()), bias: Tensor::zeros(self.bias.shape()) }
    }
}

/// Gradients with the same layout as [`NetworkParams::dense`].
pub type Gradients = Vec<DenseParams>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkParams {
    layers: Vec<LayerSpec>,
    dense: Vec<DenseParams>,
}

/// Activations of one forward pass. `activations[k]` is the input to layer
/// `k`; the last entry is the network output. Eval-mode passes keep only the
/// output.
#[derive(Debug, Clone)]
pub struct Forward {
    activations: Vec<Tensor>,
    mode: Mode,
}

impl Forward {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("forward keeps its output")
    }

    pub fn into_output(mut self) -> Tensor {
        self.activations.pop().expect("forward keeps its output")
    }

    /// Input to layer `k` (train mode only).
    pub fn activation(&self, k: usize) -> Option<&Tensor> {
        match self.mode {
            Mode::Train => self.activations.get(k),
            Mode::Eval => None,
        }
    }
}

impl NetworkParams {
    /// Builds a network with freshly initialized weights: He-uniform for dense
    /// layers feeding a ReLU, `U(±1/√fan_in)` otherwise; zero biases.
    pub fn new(layers: Vec<LayerSpec>, rng: &mut SeededRng) -> Result<Self> {
        validate_layers(&layers)?;
        let mut dense = Vec::new();
        for (k, l) in layers.iter().enumerate() {
            if l.kind != LayerKind::Dense {
                continue;
            }
            let feeds_relu = layers.get(k + 1).is_some_and(|n| n.kind == LayerKind::Relu);
            let limit = if feeds_relu { (6.0 / l.in_dim as f64).sqrt() } else { 1.0 / (l.in_dim as f64).sqrt() };
            let mut p = DenseParams::zeros(l.in_dim, l.out_dim);
            for w in p.weight.data_mut() {
                *w = (2.0 * rng.uniform() - 1.0) * limit;
            }
            dense.push(p);
        }
        Ok(NetworkParams { layers, dense })
    }

    /// Assembles a network from explicit parameters.
    pub fn from_parts(layers: Vec<LayerSpec>, dense: Vec<DenseParams>) -> Result<Self> {
        let net = NetworkParams { layers, dense };
        net.validate()?;
        Ok(net)
    }

    /// Multi-layer perceptron: dense layers between consecutive `dims`, with
    /// `hidden` after every dense layer but the last and `output` (if any)
    /// after the last.
    pub fn mlp(dims: &[usize], hidden: LayerKind, output: Option<LayerKind>, rng: &mut SeededRng) -> Result<Self> {
        NetworkParams::new(Self::mlp_layers(dims, hidden, output)?, rng)
    }

    /// Layer list of [`NetworkParams::mlp`].
    pub fn mlp_layers(dims: &[usize], hidden: LayerKind, output: Option<LayerKind>) -> Result<Vec<LayerSpec>> {
        if dims.len() < 2 {
            return Err(Error::InvalidParams("an MLP needs at least two widths".into()));
        }
        let mut layers = Vec::new();
        for w in dims.windows(2) {
            layers.push(LayerSpec::dense(w[0], w[1]));
            if layers.len() < 2 * (dims.len() - 1) - 1 {
                layers.push(LayerSpec::elementwise(hidden, w[1]));
            }
        }
        if let Some(kind) = output {
            layers.push(LayerSpec::elementwise(kind, *dims.last().unwrap()));
        }
        Ok(layers)
    }

    pub fn validate(&self) -> Result<()> {
        validate_layers(&self.layers)?;
        let dense_specs: Vec<_> = self.layers.iter().filter(|l| l.kind == LayerKind::Dense).collect();
        if dense_specs.len() != self.dense.len() {
            return Err(Error::Schema(format!(
                "{} dense layers but {} parameter sets",
                dense_specs.len(),
                self.dense.len()
            )));
        }
        for (spec, p) in dense_specs.iter().zip(&self.dense) {
            p.weight.validate()?;
            p.bias.validate()?;
            if p.weight.shape() != [spec.out_dim, spec.in_dim] || p.bias.shape() != [spec.out_dim] {
                return Err(Error::Schema(format!(
                    "dense {}→{} has weight {:?} and bias {:?}",
                    spec.in_dim,
                    spec.out_dim,
                    p.weight.shape(),
                    p.bias.shape()
                )));
            }
            if !p.weight.is_finite() || !p.bias.is_finite() {
                return Err(Error::NonFinite("network parameters".into()));
            }
        }
        Ok(())
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn dense(&self) -> &[DenseParams] {
        &self.dense
    }

    pub fn dense_mut(&mut self) -> &mut [DenseParams] {
        &mut self.dense
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().filter(|l| l.kind == LayerKind::Dense).map(|l| l.in_dim * l.out_dim + l.out_dim).sum()
    }

    pub fn zero_grads(&self) -> Gradients {
        self.dense.iter().map(DenseParams::zeros_like).collect()
    }

    /// Runs a batch `x` of shape `[batch, in_dim]` through the network.
    ///
    /// `SignSte` in eval mode is the hard sign (zero maps to +1). In train
    /// mode it adds standard logistic noise to the logit before the sign, so
    /// each output is +1 with probability `σ(logit)`.
    pub fn forward(&self, x: &Tensor, rng: &mut SeededRng, mode: Mode) -> Result<Forward> {
        self.forward_until(x, self.layers.len(), rng, mode)
    }

    /// Eval-mode output of the first `end` layers.
    pub fn infer_until(&self, x: &Tensor, end: usize) -> Result<Tensor> {
        if end == 0 || end > self.layers.len() {
            return Err(Error::InvalidParams(format!("prefix length {end} outside 1..={}", self.layers.len())));
        }
        let mut rng = SeededRng::new(0);
        Ok(self.forward_until(x, end, &mut rng, Mode::Eval)?.into_output())
    }

    fn forward_until(&self, x: &Tensor, end: usize, rng: &mut SeededRng, mode: Mode) -> Result<Forward> {
        if x.shape().len() != 2 || x.cols() != self.in_dim() {
            return Err(Error::shape(&[x.rows(), self.in_dim()], x.shape()));
        }
        let batch = x.rows();
        let mut activations = vec![x.clone()];
        let mut dense_idx = 0;
        for (k, layer) in self.layers[..end].iter().enumerate() {
            let input = activations.last().unwrap();
            let out = match layer.kind {
                LayerKind::Dense => {
                    let p = &self.dense[dense_idx];
                    dense_idx += 1;
                    let mut out = vec![0.0; batch * layer.out_dim];
                    matmul_bt(input.data(), p.weight.data(), batch, layer.in_dim, layer.out_dim, &mut out);
                    for row in out.chunks_mut(layer.out_dim) {
                        for (o, b) in row.iter_mut().zip(p.bias.data()) {
                            *o += b;
                        }
                    }
                    Tensor::new(vec![batch, layer.out_dim], out)?
                }
                LayerKind::Relu => input.map(|v| v.max(0.0)),
                LayerKind::Sigmoid => input.map(sigmoid),
                LayerKind::Tanh => input.map(f64::tanh),
                LayerKind::Softmax => {
                    let mut out = input.clone();
                    for r in 0..batch {
                        softmax_in_place(out.row_mut(r));
                    }
                    out
                }
                LayerKind::SignSte => match mode {
                    Mode::Eval => input.map(hard_sign),
                    Mode::Train => {
                        let mut out = input.clone();
                        for v in out.data_mut() {
                            *v = hard_sign(*v + rng.logistic());
                        }
                        out
                    }
                },
            };
            out.ensure_finite(&format!("layer {k} ({:?}) output", layer.kind))?;
            if mode == Mode::Eval {
                activations.clear();
            }
            activations.push(out);
        }
        Ok(Forward { activations, mode })
    }

    /// Convenience eval-mode forward returning only the output.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        // Eval mode draws nothing; the generator is a placeholder.
        let mut rng = SeededRng::new(0);
        Ok(self.forward(x, &mut rng, Mode::Eval)?.into_output())
    }

    /// Backpropagates `grad_out` (gradient of the loss w.r.t. the network
    /// output) and returns parameter gradients plus the input gradient.
    pub fn backward(&self, fwd: &Forward, grad_out: &Tensor) -> Result<(Gradients, Tensor)> {
        self.backward_from(fwd, self.layers.len(), grad_out)
    }

    /// Like [`NetworkParams::backward`], but `grad` is the gradient w.r.t.
    /// the input of layer `start` (or the output when `start` equals the
    /// layer count); layers `start..` are skipped. Used to feed a fused
    /// softmax/cross-entropy gradient straight into the logits.
    pub fn backward_from(&self, fwd: &Forward, start: usize, grad: &Tensor) -> Result<(Gradients, Tensor)> {
        if fwd.mode != Mode::Train || fwd.activations.len() != self.layers.len() + 1 {
            return Err(Error::MissingCache);
        }
        if start > self.layers.len() {
            return Err(Error::InvalidParams(format!("backward start {start} beyond layer count")));
        }
        let expect = fwd.activations[start].shape();
        if grad.shape() != expect {
            return Err(Error::shape(expect, grad.shape()));
        }
        let mut grads = self.zero_grads();
        let mut dense_idx = self.layers[..start].iter().filter(|l| l.kind == LayerKind::Dense).count();
        let mut g = grad.clone();
        for k in (0..start).rev() {
            let layer = self.layers[k];
            let input = &fwd.activations[k];
            let output = &fwd.activations[k + 1];
            let batch = input.rows();
            g = match layer.kind {
                LayerKind::Dense => {
                    dense_idx -= 1;
                    let p = &self.dense[dense_idx];
                    let gp = &mut grads[dense_idx];
                    matmul_at_acc(g.data(), input.data(), batch, layer.out_dim, layer.in_dim, gp.weight.data_mut());
                    for row in g.data().chunks(layer.out_dim) {
                        for (b, v) in gp.bias.data_mut().iter_mut().zip(row) {
                            *b += v;
                        }
                    }
                    let mut gin = vec![0.0; batch * layer.in_dim];
                    matmul(g.data(), p.weight.data(), batch, layer.out_dim, layer.in_dim, &mut gin);
                    Tensor::new(vec![batch, layer.in_dim], gin)?
                }
                LayerKind::Relu => {
                    let mut gin = g;
                    for (gv, x) in gin.data_mut().iter_mut().zip(input.data()) {
                        if *x <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    gin
                }
                LayerKind::Sigmoid => {
                    let mut gin = g;
                    for (gv, y) in gin.data_mut().iter_mut().zip(output.data()) {
                        *gv *= y * (1.0 - y);
                    }
                    gin
                }
                LayerKind::Tanh => {
                    let mut gin = g;
                    for (gv, y) in gin.data_mut().iter_mut().zip(output.data()) {
                        *gv *= 1.0 - y * y;
                    }
                    gin
                }
                LayerKind::Softmax => {
                    let mut gin = g;
                    for r in 0..batch {
                        let y = output.row(r);
                        let row = gin.row_mut(r);
                        let dot: f64 = row.iter().zip(y).map(|(a, b)| a * b).sum();
                        for (gv, yv) in row.iter_mut().zip(y) {
                            *gv = yv * (*gv - dot);
                        }
                    }
                    gin
                }
                LayerKind::SignSte => {
                    let mut gin = g;
                    for (gv, z) in gin.data_mut().iter_mut().zip(input.data()) {
                        let p = sigmoid(*z);
                        *gv *= 2.0 * p * (1.0 - p);
                    }
                    gin
                }
            };
        }
        Ok((grads, g))
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Schema("network has no layers".into()));
    }
    for (k, l) in layers.iter().enumerate() {
        if l.in_dim == 0 || l.out_dim == 0 {
            return Err(Error::Schema(format!("layer {k} has a zero dimension")));
        }
        if l.kind != LayerKind::Dense && l.in_dim != l.out_dim {
            return Err(Error::Schema(format!("elementwise layer {k} changes width {}→{}", l.in_dim, l.out_dim)));
        }
        if k > 0 && layers[k - 1].out_dim != l.in_dim {
            return Err(Error::Schema(format!(
                "layer {k} expects {} inputs but layer {} produces {}",
                l.in_dim,
                k - 1,
                layers[k - 1].out_dim
            )));
        }
    }
    Ok(())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn hard_sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}
