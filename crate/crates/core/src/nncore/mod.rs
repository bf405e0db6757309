//! Dense neural-network substrate: tensors, layers with analytic
//! backpropagation, a straight-through binary bottleneck and Adam.

mod adam;
mod network;
mod rng;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use network::{
    hard_sign, sigmoid, softmax_in_place, DenseParams, Forward, Gradients, LayerKind, LayerSpec, Mode, NetworkParams,
};
pub use rng::{SeededRng, RNG_ALGORITHM};
pub use tensor::Tensor;
#[allow(unused_imports)]
pub(crate) use tensor::{matmul, matmul_bt};

use crate::error::{Error, Result};

/// Entropy of a Bernoulli(p) bit in nats, with `0·ln 0 = 0`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    Ok(xlnx_neg(p) + xlnx_neg(1.0 - p))
}

fn xlnx_neg(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Binary entropy of `σ(z)` computed from the logit, stable for large |z|.
pub fn binary_entropy_logit(z: f64) -> f64 {
    // H = ln(1 + e^{-|z|}) + |z|·σ(-|z|)
    let a = z.abs();
    (-a).exp().ln_1p() + a * sigmoid(-a)
}
