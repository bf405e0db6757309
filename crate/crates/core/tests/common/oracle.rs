//! Reference implementations written without the crate's numerics: naive
//! loops for the networks, plain grid quadrature for the entropies and
//! exhaustive enumeration of the bottleneck.

#![allow(dead_code)]

use num_complex::Complex64;
use sfdma_core::channel::{ChannelRealization, PowerAllocation};
use sfdma_core::nncore::{LayerKind, NetworkParams, SeededRng};
use sfdma_core::rib::TransceiverPair;

/// Row-vector forward pass with explicit loops; `stop` layers are run.
pub fn naive_forward(net: &NetworkParams, x: &[f64], stop: usize) -> Vec<f64> {
    let mut a = x.to_vec();
    let mut dense = net.dense().iter();
    for layer in &net.layers()[..stop] {
        a = match layer.kind {
            LayerKind::Dense => {
                let p = dense.next().unwrap();
                let (w, b) = (p.weight.data(), p.bias.data());
                (0..layer.out_dim)
                    .map(|o| b[o] + (0..layer.in_dim).map(|k| w[o * layer.in_dim + k] * a[k]).sum::<f64>())
                    .collect()
            }
            LayerKind::Relu => a.iter().map(|v| if *v > 0.0 { *v } else { 0.0 }).collect(),
            LayerKind::Sigmoid => a.iter().map(|v| 1.0 / (1.0 + (-v).exp())).collect(),
            LayerKind::Tanh => a.iter().map(|v| v.tanh()).collect(),
            LayerKind::Softmax => {
                let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            }
            LayerKind::SignSte => a.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect(),
        };
    }
    a
}

/// Entropy of a circular complex Gaussian mixture by a plain midpoint sum on
/// a fine grid, with every component term evaluated directly.
pub fn grid_entropy(means: &[Complex64], noise_var: f64) -> f64 {
    let sd = noise_var.sqrt();
    let pad = 9.0 * sd;
    let lo_re = means.iter().map(|m| m.re).fold(f64::INFINITY, f64::min) - pad;
    let hi_re = means.iter().map(|m| m.re).fold(f64::NEG_INFINITY, f64::max) + pad;
    let lo_im = means.iter().map(|m| m.im).fold(f64::INFINITY, f64::min) - pad;
    let hi_im = means.iter().map(|m| m.im).fold(f64::NEG_INFINITY, f64::max) + pad;
    let h = sd / 12.0;
    let nx = ((hi_re - lo_re) / h).ceil() as usize;
    let ny = ((hi_im - lo_im) / h).ceil() as usize;
    let (hx, hy) = ((hi_re - lo_re) / nx as f64, (hi_im - lo_im) / ny as f64);
    let w = 1.0 / (means.len() as f64 * std::f64::consts::PI * noise_var);
    let mut acc = 0.0;
    for a in 0..nx {
        let x = lo_re + (a as f64 + 0.5) * hx;
        for b in 0..ny {
            let y = lo_im + (b as f64 + 0.5) * hy;
            let f: f64 = means.iter().map(|m| w * (-((x - m.re).powi(2) + (y - m.im).powi(2)) / noise_var).exp()).sum();
            if f > 0.0 {
                acc -= f * f.ln();
            }
        }
    }
    acc * hx * hy
}

/// `H(Y_r | x_r)` with uniform ±1 interferers, by enumerating their signs.
pub fn cond_entropy_reference(own: Complex64, interferers: &[(f64, Complex64)], noise_var: f64) -> f64 {
    let m = interferers.len();
    let means: Vec<Complex64> = (0..1usize << m)
        .map(|mask| {
            let mut acc = own;
            for (j, &(p, g)) in interferers.iter().enumerate() {
                let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                acc += g * (s * p.sqrt());
            }
            acc
        })
        .collect();
    grid_entropy(&means, noise_var)
}

pub struct OracleTerms {
    pub ce: f64,
    pub hyx: f64,
    pub hxs: f64,
    pub total: f64,
}

/// Reference value of the objective for `V = L = 1`.
///
/// The expectation terms enumerate all `2^d` bottleneck outcomes of the
/// optimized user, weighted by their probabilities. The cross-entropy term
/// is evaluated at the outcome drawn from `rng`, replaying the documented
/// draw order (encoders of the transmitting users in index order, one
/// logistic draw per bit, then the receiver noise).
pub fn rib_loss_oracle(
    pairs: &[TransceiverPair],
    user: usize,
    inputs: &[Vec<f64>],
    label: usize,
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    rng: &mut SeededRng,
) -> OracleTerms {
    let n = pairs.len();
    let d = pairs[user].bits;
    let lambda = pairs[user].lambda;
    let mut bits: Vec<Vec<f64>> = Vec::new();
    let mut own_logits = Vec::new();
    for (j, pair) in pairs.iter().enumerate() {
        let stop = pair.encoder.layers().len() - 1;
        let z = naive_forward(&pair.encoder, &inputs[j], stop);
        bits.push(z.iter().map(|v| if v + rng.logistic() >= 0.0 { 1.0 } else { -1.0 }).collect());
        if j == user {
            own_logits = z;
        }
    }
    let noise: Vec<Complex64> = (0..d).map(|_| rng.complex_normal(ch.noise_var()[user])).collect();

    let mut features = vec![0.0; 2 * d];
    for r in 0..d {
        let mut y = noise[r];
        for j in 0..n {
            y += ch.gain(user, j).0[r] * (pw.get(j).sqrt() * bits[j][r]);
        }
        let yh = y / ch.gain(user, user).0[r];
        features[r] = yh.re;
        features[d + r] = yh.im;
    }
    let dec = &pairs[user].decoder;
    let post = naive_forward(dec, &features, dec.layers().len());
    let ce = -post[label].ln();

    let probs: Vec<f64> = own_logits.iter().map(|z| 1.0 / (1.0 + (-z).exp())).collect();
    let mut hyx = 0.0;
    let mut hxs = 0.0;
    for mask in 0..1usize << d {
        let x: Vec<f64> = (0..d).map(|r| if mask >> r & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let prob: f64 = (0..d).map(|r| if x[r] > 0.0 { probs[r] } else { 1.0 - probs[r] }).product();
        if prob == 0.0 {
            continue;
        }
        hxs -= prob * prob.ln();
        let mut h = 0.0;
        for r in 0..d {
            let own = ch.gain(user, user).0[r] * (pw.get(user).sqrt() * x[r]);
            let intf: Vec<(f64, Complex64)> =
                (0..n).filter(|&j| j != user).map(|j| (pw.get(j), ch.gain(user, j).0[r])).collect();
            h += cond_entropy_reference(own, &intf, ch.noise_var()[user]);
        }
        hyx += prob * h;
    }
    let (hyx, hxs) = (lambda * hyx, lambda * hxs);
    OracleTerms { ce, hyx, hxs, total: ce + hyx - hxs }
}

/// Largest relative deviation between analytic and central-difference
/// derivatives, with an absolute floor for near-zero entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic.iter().zip(numeric).map(|(a, f)| (a - f).abs() / a.abs().max(f.abs()).max(1e-6)).fold(0.0, f64::max)
}

/// Central differences of `f` at every coordinate of `x`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|k| {
            p[k] = x[k] + h;
            let up = f(&p);
            p[k] = x[k] - h;
            let down = f(&p);
            p[k] = x[k];
            (up - down) / (2.0 * h)
        })
        .collect()
}
