use serde::{Deserialize, Serialize};

use super::network::{DenseParams, Gradients, NetworkParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction; one state per network.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<DenseParams>,
    second: Vec<DenseParams>,
}

impl AdamState {
    pub fn new(net: &NetworkParams, config: AdamConfig) -> Self {
        AdamState { config, step: 0, first: net.zero_grads(), second: net.zero_grads() }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, net: &mut NetworkParams, grads: &Gradients) -> Result<()> {
        if grads.len() != net.dense().len() || grads.len() != self.first.len() {
            return Err(Error::shape(&[net.dense().len()], &[grads.len()]));
        }
        for ((p, g), m) in net.dense().iter().zip(grads).zip(&self.first) {
            p.weight.same_shape(&g.weight)?;
            p.bias.same_shape(&g.bias)?;
            p.weight.same_shape(&m.weight)?;
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (((p, g), m), v) in net.dense_mut().iter_mut().zip(grads).zip(&mut self.first).zip(&mut self.second) {
            let pairs = [
                (p.weight.data_mut(), g.weight.data(), m.weight.data_mut(), v.weight.data_mut()),
                (p.bias.data_mut(), g.bias.data(), m.bias.data_mut(), v.bias.data_mut()),
            ];
            for (pv, gv, mv, vv) in pairs {
                for i in 0..pv.len() {
                    let gi = gv[i];
                    mv[i] = beta1 * mv[i] + (1.0 - beta1) * gi;
                    vv[i] = beta2 * vv[i] + (1.0 - beta2) * gi * gi;
                    let mhat = mv[i] / c1;
                    let vhat = vv[i] / c2;
                    pv[i] -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
