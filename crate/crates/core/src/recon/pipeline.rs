//! Chains of per-position dense networks and pixel permutations.
//!
//! Images are stored row-major HWC, so a tensor `[B, P·C]` whose rows hold
//! `P` positions of `C` channels is the same memory as `[B·P, C]`. A dense
//! net applied to every position is therefore just the net run on the
//! reshaped batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{Forward, Gradients, Mode, NetworkParams, SeededRng, Tensor};

/// Index map for merging `f×f` pixel patches into the channel axis:
/// `out[k] = in[perm[k]]`, output layout `(h/f, w/f, (dy, dx, c))`.
pub fn space_to_depth_perm(h: usize, w: usize, c: usize, f: usize) -> Result<Vec<usize>> {
    if f == 0 || !h.is_multiple_of(f) || !w.is_multiple_of(f) {
        return Err(Error::InvalidParams(format!("{h}×{w} not divisible by patch factor {f}")));
    }
    let mut perm = Vec::with_capacity(h * w * c);
    for by in 0..h / f {
        for bx in 0..w / f {
            for dy in 0..f {
                for dx in 0..f {
                    let (y, x) = (by * f + dy, bx * f + dx);
                    for ch in 0..c {
                        perm.push((y * w + x) * c + ch);
                    }
                }
            }
        }
    }
    Ok(perm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Step {
    /// Run network `k` on every `in_dim`-wide chunk of each row.
    Net(usize),
    /// `out[k] = in[perm[k]]` within each row.
    Gather(Vec<usize>),
    /// `out[perm[k]] = in[k]` within each row.
    Scatter(Vec<usize>),
}

pub struct Cache {
    forwards: Vec<Option<Forward>>,
}

/// Runs `steps` over `x` `[B × D]`.
pub fn forward(
    nets: &[NetworkParams],
    steps: &[Step],
    x: &Tensor,
    mode: Mode,
    rng: &mut SeededRng,
) -> Result<(Tensor, Cache)> {
    let b = x.rows();
    let mut cur = x.clone();
    let mut forwards = Vec::with_capacity(steps.len());
    for step in steps {
        match step {
            Step::Net(k) => {
                let net = &nets[*k];
                let width = cur.cols();
                if !width.is_multiple_of(net.in_dim()) {
                    return Err(Error::shape(&[b, net.in_dim()], cur.shape()));
                }
                let flat = cur.reshape(&[b * width / net.in_dim(), net.in_dim()])?;
                let fwd = net.forward(&flat, rng, mode)?;
                let out = fwd.output().clone();
                let cols = out.len() / b;
                cur = out.reshape(&[b, cols])?;
                forwards.push(if mode == Mode::Train { Some(fwd) } else { None });
            }
            Step::Gather(perm) => {
                cur = permute(&cur, perm, false)?;
                forwards.push(None);
            }
            Step::Scatter(perm) => {
                cur = permute(&cur, perm, true)?;
                forwards.push(None);
            }
        }
    }
    Ok((cur, Cache { forwards }))
}

/// Backpropagates `grad` through a train-mode [`forward`]. Returns one
/// gradient set per network and the input gradient.
pub fn backward(
    nets: &[NetworkParams],
    steps: &[Step],
    cache: &Cache,
    grad: &Tensor,
) -> Result<(Vec<Gradients>, Tensor)> {
    let b = grad.rows();
    let mut grads: Vec<Gradients> = nets.iter().map(|n| n.zero_grads()).collect();
    let mut g = grad.clone();
    for (step, fwd) in steps.iter().zip(&cache.forwards).rev() {
        g = match step {
            Step::Net(k) => {
                let net = &nets[*k];
                let fwd = fwd.as_ref().ok_or(Error::MissingCache)?;
                let flat = g.reshape(&[fwd.output().rows(), net.out_dim()])?;
                let (gk, gin) = net.backward(fwd, &flat)?;
                for (acc, add) in grads[*k].iter_mut().zip(gk) {
                    for (a, v) in acc.weight.data_mut().iter_mut().zip(add.weight.data()) {
                        *a += v;
                    }
                    for (a, v) in acc.bias.data_mut().iter_mut().zip(add.bias.data()) {
                        *a += v;
                    }
                }
                let cols = gin.len() / b;
                gin.reshape(&[b, cols])?
            }
            // The adjoint of a gather is the matching scatter, and vice versa.
            Step::Gather(perm) => permute(&g, perm, true)?,
            Step::Scatter(perm) => permute(&g, perm, false)?,
        };
    }
    Ok((grads, g))
}

fn permute(x: &Tensor, perm: &[usize], scatter: bool) -> Result<Tensor> {
    if x.cols() != perm.len() {
        return Err(Error::shape(&[x.rows(), perm.len()], x.shape()));
    }
    let mut out = Tensor::zeros(x.shape());
    for r in 0..x.rows() {
        let (src, dst) = (x.row(r), out.row_mut(r));
        for (k, &p) in perm.iter().enumerate() {
            if scatter {
                dst[p] = src[k];
            } else {
                dst[k] = src[p];
            }
        }
    }
    Ok(out)
}
