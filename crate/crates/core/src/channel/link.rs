//! Batched receive path used by training and evaluation: superposition over
//! one channel realization, AWGN, then zero-forcing at the receiver.

use num_complex::Complex64;

use super::{check_gain, ChannelRealization, PowerAllocation};
use crate::error::{Error, Result};
use crate::nncore::{SeededRng, Tensor};

/// Which transmitters reach the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Include {
    All,
    /// Own signal only (interference-free reference).
    OwnOnly,
    /// A single transmitter, possibly not the receiver's own.
    Only(usize),
}

/// `[rows × d]` complex noise samples for one receiver.
#[derive(Debug, Clone)]
pub struct BatchNoise {
    dim: usize,
    samples: Vec<Complex64>,
}

impl BatchNoise {
    pub fn draw(rows: usize, dim: usize, noise_var: f64, rng: &mut SeededRng) -> Self {
        BatchNoise { dim, samples: (0..rows * dim).map(|_| rng.complex_normal(noise_var)).collect() }
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        BatchNoise { dim, samples: vec![Complex64::new(0.0, 0.0); rows * dim] }
    }

    pub fn get(&self, row: usize, r: usize) -> Complex64 {
        self.samples[row * self.dim + r]
    }
}

/// Equalized receive at `rx` for a batch. `symbols[j]` is TX `j`'s real
/// symbol batch `[rows × d]`; every row of the batch shares the realization
/// `ch`. Returns `[rows × 2d]` rows laid out as `[re(ŷ); im(ŷ)]`.
pub fn equalized_batch(
    rx: usize,
    symbols: &[&Tensor],
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    include: Include,
    noise: Option<&BatchNoise>,
) -> Result<Tensor> {
    let d = ch.dim();
    let n = ch.users();
    if symbols.len() != n || pw.0.len() != n || rx >= n {
        return Err(Error::shape(&[n], &[symbols.len()]));
    }
    let rows = symbols[0].rows();
    for s in symbols {
        if s.shape() != [rows, d] {
            return Err(Error::shape(&[rows, d], s.shape()));
        }
    }
    if let Some(nz) = noise {
        if nz.dim != d || nz.samples.len() != rows * d {
            return Err(Error::shape(&[rows, d], &[nz.samples.len()]));
        }
    }
    let own = ch.gain(rx, rx);
    check_gain(own)?;
    let inv: Vec<Complex64> = own.0.iter().map(|g| g.inv()).collect();
    let senders: Vec<usize> = match include {
        Include::All => (0..n).collect(),
        Include::OwnOnly => vec![rx],
        Include::Only(j) if j < n => vec![j],
        Include::Only(j) => return Err(Error::InvalidParams(format!("transmitter {j} out of range"))),
    };
    // Per-sender effective post-equalization coefficient g_ij √p_j / g_ii.
    let coeffs: Vec<(usize, Vec<Complex64>)> = senders
        .iter()
        .map(|&j| {
            let amp = pw.get(j).sqrt();
            (j, ch.gain(rx, j).0.iter().zip(&inv).map(|(g, iv)| g * iv * amp).collect())
        })
        .collect();
    let mut out = vec![0.0; rows * 2 * d];
    for q in 0..rows {
        let o = &mut out[q * 2 * d..(q + 1) * 2 * d];
        for r in 0..d {
            let mut acc = match noise {
                Some(nz) => nz.get(q, r) * inv[r],
                None => Complex64::new(0.0, 0.0),
            };
            for (j, c) in &coeffs {
                acc += c[r] * symbols[*j].data()[q * d + r];
            }
            o[r] = acc.re;
            o[d + r] = acc.im;
        }
    }
    let t = Tensor::new(vec![rows, 2 * d], out)?;
    t.ensure_finite("equalized receive")?;
    Ok(t)
}
