//! Shared evaluation loop: every user transmits eval-mode symbols, each
//! batch sees a fresh channel realization and noise, and a task-specific
//! score is accumulated per receiver.

use crate::channel::{equalized_batch, sample_channel, BatchNoise, Include, PowerAllocation};
use crate::error::{Error, Result};
use crate::nncore::{SeededRng, Tensor};
use crate::par::Exec;

/// Rows per evaluation batch; one channel realization per batch.
pub const EVAL_BATCH: usize = 250;

/// A trained encoder/decoder pair seen from the link layer.
pub trait Transceiver: Sync {
    /// Symbols per block.
    fn bits(&self) -> usize;

    /// Deterministic (eval-mode) BPSK symbols `[rows × d]` for `inputs`.
    fn transmit(&self, inputs: &Tensor) -> Result<Tensor>;

    /// Decoder output for equalized rows `[rows × 2d]`.
    fn receive(&self, equalized: &Tensor) -> Result<Tensor>;
}

/// Which signals reach receiver `i` during an evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Full superposition plus noise.
    Received,
    /// Only TX `j`'s signal through `g_ij`, no noise and no own signal.
    InterferenceOnly(usize),
}

/// Scores `rows` of decoder output for rows `start..start+rows` of the
/// dataset; returns a sum that is later divided by the row count.
pub type ScoreFn<'a> = dyn Fn(&Tensor, usize) -> Result<f64> + Sync + 'a;

/// Eval-mode symbols of every user for the same inputs.
pub fn transmit_all<P: Transceiver>(pairs: &[P], inputs: &Tensor) -> Result<Vec<Tensor>> {
    pairs.iter().map(|p| p.transmit(inputs)).collect()
}

/// Mean score of receiver `rx` over `trials` passes through `inputs`.
#[allow(clippy::too_many_arguments)]
pub fn mean_score<P: Transceiver>(
    pairs: &[P],
    symbols: &[Tensor],
    rx: usize,
    route: Route,
    snr_db: f64,
    pw: &PowerAllocation,
    trials: usize,
    rng: &SeededRng,
    exec: Exec,
    score: &ScoreFn<'_>,
) -> Result<f64> {
    let n = pairs.len();
    if n == 0 || symbols.len() != n || pw.0.len() != n || rx >= n {
        return Err(Error::InvalidParams("pairs, symbols and powers must cover every user".into()));
    }
    if trials == 0 {
        return Err(Error::InvalidParams("trials must be ≥ 1".into()));
    }
    let d = pairs[0].bits();
    if pairs.iter().any(|p| p.bits() != d) {
        return Err(Error::InvalidParams("all users must share the block length".into()));
    }
    let rows = symbols[0].rows();
    let batches = rows.div_ceil(EVAL_BATCH);
    let noise_var = pw.noise_for_snr_db(snr_db);
    let sums = exec.try_map(trials * batches, |item| -> Result<f64> {
        let b = item % batches;
        let mut r = rng.fork(item as u64);
        let ch = sample_channel(n, d, &noise_var, &mut r)?;
        let start = b * EVAL_BATCH;
        let len = EVAL_BATCH.min(rows - start);
        let idx: Vec<usize> = (start..start + len).collect();
        let batch: Vec<Tensor> = symbols.iter().map(|s| s.select_rows(&idx)).collect();
        let refs: Vec<&Tensor> = batch.iter().collect();
        let eq = match route {
            Route::Received => {
                let noise = BatchNoise::draw(len, d, noise_var[rx], &mut r.fork(rx as u64));
                equalized_batch(rx, &refs, &ch, pw, Include::All, Some(&noise))?
            }
            Route::InterferenceOnly(j) => equalized_batch(rx, &refs, &ch, pw, Include::Only(j), None)?,
        };
        let out = pairs[rx].receive(&eq)?;
        score(&out, start)
    })?;
    Ok(sums.iter().sum::<f64>() / (trials * rows) as f64)
}
