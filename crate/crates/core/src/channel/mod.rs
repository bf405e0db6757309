//! Digital interference-channel physics.
//!
//! Each of N transmitters sends a length-d block of BPSK symbols; receiver
//! `i` sees `y_i = Σ_j g_ij ⊙ √p_j x_j + n_i` with per-dimension complex
//! gains and circular AWGN, then zero-forces its own gain elementwise.

mod entropy;
mod link;

pub use entropy::{cond_output_entropy, mixture_components, MAX_INTERFERERS};
pub use link::{equalized_batch, BatchNoise, Include};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::SeededRng;

/// Gains below this magnitude make zero-forcing an error.
pub const DEGENERATE_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexBlock(pub Vec<Complex64>);

impl ComplexBlock {
    pub fn zeros(d: usize) -> Self {
        ComplexBlock(vec![Complex64::new(0.0, 0.0); d])
    }

    pub fn from_real(re: &[f64]) -> Self {
        ComplexBlock(re.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn scale(&self, a: f64) -> Self {
        ComplexBlock(self.0.iter().map(|z| z * a).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `[re_0..re_{d-1}, im_0..im_{d-1}]`, the decoder input layout.
    pub fn to_features(&self) -> Vec<f64> {
        self.0.iter().map(|z| z.re).chain(self.0.iter().map(|z| z.im)).collect()
    }
}

/// Maps bits to BPSK: `1`/`+1` → `+1+0i`, `0`/`−1` → `−1+0i`.
///
/// The block must use one convention throughout: all of {0, 1} or all of
/// {−1, +1}.
pub fn modulate_bpsk(bits: &[f64]) -> Result<ComplexBlock> {
    if bits.is_empty() {
        return Err(Error::InvalidParams("empty bit block".into()));
    }
    let zero_one = bits.iter().all(|&b| b == 0.0 || b == 1.0);
    let antipodal = bits.iter().all(|&b| b == -1.0 || b == 1.0);
    if !zero_one && !antipodal {
        let bad = bits.iter().copied().find(|&b| !(b == 0.0 || b == 1.0 || b == -1.0)).unwrap_or(bits[0]);
        return Err(Error::NonBinary(bad));
    }
    Ok(ComplexBlock(bits.iter().map(|&b| Complex64::new(if b == 1.0 { 1.0 } else { -1.0 }, 0.0)).collect()))
}

/// Hard demapper `sign(re(·))` back to ±1.
pub fn demap_bpsk(block: &ComplexBlock) -> Vec<f64> {
    block.0.iter().map(|z| if z.re >= 0.0 { 1.0 } else { -1.0 }).collect()
}

/// Rescales so that `‖x‖² = d`.
pub fn normalize_power(m: &ComplexBlock) -> Result<ComplexBlock> {
    let e = m.energy();
    if e <= 0.0 || !e.is_finite() {
        return Err(Error::ZeroEnergy);
    }
    let d = m.len() as f64;
    if e == d {
        return Ok(m.clone());
    }
    Ok(m.scale((d / e).sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    users: usize,
    dim: usize,
    /// Row-major `[rx][tx]`.
    gains: Vec<ComplexBlock>,
    noise_var: Vec<f64>,
}

impl ChannelRealization {
    pub fn new(users: usize, dim: usize, gains: Vec<ComplexBlock>, noise_var: Vec<f64>) -> Result<Self> {
        if users == 0 || dim == 0 {
            return Err(Error::InvalidParams("channel needs N ≥ 1 and d ≥ 1".into()));
        }
        if gains.len() != users * users || gains.iter().any(|g| g.len() != dim) {
            return Err(Error::shape(&[users, users, dim], &[gains.len()]));
        }
        if noise_var.len() != users {
            return Err(Error::shape(&[users], &[noise_var.len()]));
        }
        if noise_var.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParams("noise variances must be finite and nonnegative".into()));
        }
        Ok(ChannelRealization { users, dim, gains, noise_var })
    }

    /// Unit gains everywhere.
    pub fn flat(users: usize, dim: usize, noise_var: Vec<f64>) -> Result<Self> {
        let g = ComplexBlock(vec![Complex64::new(1.0, 0.0); dim]);
        ChannelRealization::new(users, dim, vec![g; users * users], noise_var)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Gain from TX `tx` to RX `rx`.
    pub fn gain(&self, rx: usize, tx: usize) -> &ComplexBlock {
        &self.gains[rx * self.users + tx]
    }

    pub fn gain_mut(&mut self, rx: usize, tx: usize) -> &mut ComplexBlock {
        &mut self.gains[rx * self.users + tx]
    }

    pub fn noise_var(&self) -> &[f64] {
        &self.noise_var
    }

    /// `[rx][tx]` mean of `|g_r|²` over the block.
    pub fn mean_gain_power(&self) -> Vec<Vec<f64>> {
        (0..self.users).map(|i| (0..self.users).map(|j| self.gain(i, j).energy() / self.dim as f64).collect()).collect()
    }
}

/// Draws i.i.d. `CN(0, 1)` gains for every RX/TX pair and dimension.
pub fn sample_channel(users: usize, dim: usize, noise_var: &[f64], rng: &mut SeededRng) -> Result<ChannelRealization> {
    let gains = (0..users * users).map(|_| ComplexBlock((0..dim).map(|_| rng.complex_normal(1.0)).collect())).collect();
    ChannelRealization::new(users, dim, gains, noise_var.to_vec())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation(pub Vec<f64>);

impl PowerAllocation {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams(format!("transmit powers must be finite and ≥ 0: {p:?}")));
        }
        Ok(PowerAllocation(p))
    }

    pub fn uniform(users: usize, p: f64) -> Self {
        PowerAllocation(vec![p; users])
    }

    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    /// Noise variances that give each receiver `SNR = p_i / σ_i²`.
    pub fn noise_for_snr_db(&self, snr_db: f64) -> Vec<f64> {
        let snr = from_db(snr_db);
        self.0.iter().map(|p| p / snr).collect()
    }
}

/// One fresh `CN(0, σ_i² I)` noise block per receiver.
pub fn draw_noise(ch: &ChannelRealization, rng: &mut SeededRng) -> Vec<ComplexBlock> {
    ch.noise_var.iter().map(|&v| ComplexBlock((0..ch.dim).map(|_| rng.complex_normal(v)).collect())).collect()
}

/// Superposition at every receiver with fresh noise.
pub fn apply_channel(
    x_all: &[ComplexBlock],
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    rng: &mut SeededRng,
) -> Result<Vec<ComplexBlock>> {
    check_inputs(x_all, ch, pw)?;
    let noise = draw_noise(ch, rng);
    apply_channel_with_noise(x_all, ch, pw, &noise)
}

/// Superposition with caller-supplied noise blocks.
pub fn apply_channel_with_noise(
    x_all: &[ComplexBlock],
    ch: &ChannelRealization,
    pw: &PowerAllocation,
    noise: &[ComplexBlock],
) -> Result<Vec<ComplexBlock>> {
    check_inputs(x_all, ch, pw)?;
    if noise.len() != ch.users || noise.iter().any(|n| n.len() != ch.dim) {
        return Err(Error::shape(&[ch.users, ch.dim], &[noise.len()]));
    }
    Ok((0..ch.users)
        .map(|i| {
            let mut y = noise[i].clone();
            for (j, x) in x_all.iter().enumerate() {
                let amp = pw.get(j).sqrt();
                for ((yr, g), xr) in y.0.iter_mut().zip(&ch.gain(i, j).0).zip(&x.0) {
                    *yr += g * xr * amp;
                }
            }
            y
        })
        .collect())
}

fn check_inputs(x_all: &[ComplexBlock], ch: &ChannelRealization, pw: &PowerAllocation) -> Result<()> {
    if x_all.len() != ch.users || pw.0.len() != ch.users {
        return Err(Error::shape(&[ch.users], &[x_all.len(), pw.0.len()]));
    }
    if let Some(x) = x_all.iter().find(|x| x.len() != ch.dim) {
        return Err(Error::shape(&[ch.dim], &[x.len()]));
    }
    Ok(())
}

/// Elementwise zero-forcing `ŷ_r = y_r / g_r`.
pub fn equalize_zf(y: &ComplexBlock, g: &ComplexBlock) -> Result<ComplexBlock> {
    if y.len() != g.len() {
        return Err(Error::shape(&[g.len()], &[y.len()]));
    }
    check_gain(g)?;
    Ok(ComplexBlock(y.0.iter().zip(&g.0).map(|(yr, gr)| yr / gr).collect()))
}

pub(crate) fn check_gain(g: &ComplexBlock) -> Result<()> {
    for (index, gr) in g.0.iter().enumerate() {
        let magnitude = gr.norm();
        if !(magnitude >= DEGENERATE_GAIN) {
            return Err(Error::DegenerateChannel { index, magnitude });
        }
    }
    Ok(())
}

/// SINR at receiver `i`: `p_i|g_ii|² / (Σ_{j≠i} p_j|g_ij|² + σ_i²)`, where
/// `gain_power[i][j]` is the (mean) `|g_ij|²`.
pub fn sinr(pw: &PowerAllocation, gain_power: &[Vec<f64>], noise_var: &[f64], i: usize) -> Result<f64> {
    let n = pw.0.len();
    if gain_power.len() != n || gain_power.iter().any(|r| r.len() != n) || noise_var.len() != n || i >= n {
        return Err(Error::shape(&[n, n], &[gain_power.len()]));
    }
    let interference: f64 = (0..n).filter(|&j| j != i).map(|j| pw.get(j) * gain_power[i][j]).sum();
    let denom = interference + noise_var[i];
    if !(denom > 0.0) {
        return Err(Error::ZeroDenominator("SINR"));
    }
    Ok(pw.get(i) * gain_power[i][i] / denom)
}

pub fn to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

pub fn from_db(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn bpsk_map() {
        let b = modulate_bpsk(&[0.0, 1.0, 1.0]).unwrap();
        assert_eq!(b.0, vec![c(-1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0)]);
        let ones = modulate_bpsk(&[1.0; 5]).unwrap();
        assert_eq!(ones.energy(), 5.0);
        assert_eq!(modulate_bpsk(&[-1.0, 1.0]).unwrap().0, vec![c(-1.0, 0.0), c(1.0, 0.0)]);
    }

    #[test]
    fn bpsk_rejects_non_binary_and_mixed() {
        assert!(matches!(modulate_bpsk(&[0.0, 0.5]), Err(Error::NonBinary(v)) if v == 0.5));
        assert!(modulate_bpsk(&[0.0, -1.0]).is_err());
        assert!(modulate_bpsk(&[]).is_err());
    }

    #[test]
    fn normalize_scale_invariance() {
        let b = modulate_bpsk(&[1.0, -1.0, 1.0, 1.0]).unwrap();
        assert_eq!(normalize_power(&b).unwrap(), b);
        let x = normalize_power(&b.scale(7.0)).unwrap();
        assert!((x.energy() - 4.0).abs() < 1e-12);
        for (a, e) in x.0.iter().zip(&b.0) {
            assert!((a - e).norm() < 1e-12);
        }
        assert!(matches!(normalize_power(&ComplexBlock::zeros(3)), Err(Error::ZeroEnergy)));
    }

    #[test]
    fn single_user_noiseless_identity() {
        let x = modulate_bpsk(&[1.0, 0.0, 1.0]).unwrap();
        let ch = ChannelRealization::flat(1, 3, vec![0.0]).unwrap();
        let mut rng = SeededRng::new(1);
        let y = apply_channel(std::slice::from_ref(&x), &ch, &PowerAllocation::uniform(1, 1.0), &mut rng).unwrap();
        assert_eq!(y[0], x);
    }

    #[test]
    fn no_interference_when_other_is_silent() {
        let mut rng = SeededRng::new(2);
        let ch = sample_channel(2, 4, &[0.0, 0.0], &mut rng).unwrap();
        let x1 = modulate_bpsk(&[1.0, 0.0, 0.0, 1.0]).unwrap();
        let pw = PowerAllocation(vec![2.0, 1.0]);
        let y = apply_channel(&[x1.clone(), ComplexBlock::zeros(4)], &ch, &pw, &mut rng).unwrap();
        for r in 0..4 {
            assert_eq!(y[0].0[r], ch.gain(0, 0).0[r] * x1.0[r] * 2f64.sqrt());
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ch = ChannelRealization::flat(2, 3, vec![1.0, 1.0]).unwrap();
        let mut rng = SeededRng::new(0);
        let pw = PowerAllocation::uniform(2, 1.0);
        assert!(apply_channel(&[ComplexBlock::zeros(3)], &ch, &pw, &mut rng).is_err());
        assert!(apply_channel(&[ComplexBlock::zeros(3), ComplexBlock::zeros(2)], &ch, &pw, &mut rng).is_err());
    }

    #[test]
    fn zf_round_trip_and_degenerate_gain() {
        let mut rng = SeededRng::new(5);
        let g = ComplexBlock((0..16).map(|_| rng.complex_normal(1.0)).collect());
        let y = ComplexBlock((0..16).map(|_| rng.complex_normal(3.0)).collect());
        let yh = equalize_zf(&y, &g).unwrap();
        for r in 0..16 {
            assert!((yh.0[r] * g.0[r] - y.0[r]).norm() < 1e-12);
        }
        let ones = ComplexBlock(vec![c(1.0, 0.0); 16]);
        assert_eq!(equalize_zf(&y, &ones).unwrap(), y);
        let mut bad = g.clone();
        bad.0[7] = c(1e-10, 0.0);
        assert!(matches!(equalize_zf(&y, &bad), Err(Error::DegenerateChannel { index: 7, .. })));
    }

    #[test]
    fn sinr_reference_values() {
        let one = PowerAllocation(vec![1.0]);
        assert_eq!(sinr(&one, &[vec![1.0]], &[1.0], 0).unwrap(), 1.0);
        let two = PowerAllocation(vec![1.0, 1.0]);
        let gp = vec![vec![1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(sinr(&two, &gp, &[1.0, 1.0], 0).unwrap(), 0.5);
        let gp = vec![vec![2.0, 0.5], vec![1.0, 1.0]];
        let pw = PowerAllocation(vec![3.0, 4.0]);
        assert_eq!(sinr(&pw, &gp, &[0.0, 0.0], 0).unwrap(), 3.0 * 2.0 / (4.0 * 0.5));
        assert!(matches!(sinr(&one, &[vec![1.0]], &[0.0], 0), Err(Error::ZeroDenominator(_))));
        assert!((to_db(1.0)).abs() < 1e-15);
        assert!((from_db(to_db(3.7)) - 3.7).abs() < 1e-12);
    }
}
