use serde::{Deserialize, Serialize};

use super::{check_target, required_power, sinr_linear, AbgParams};
use crate::error::{Error, Result};
use crate::nncore::SeededRng;
use crate::par::Exec;

const CHUNK: usize = 4096;
/// Accuracy shortfall tolerated before a realization counts as an outage.
const OUTAGE_TOL: f64 = 1e-9;

/// Time-indexed fading for one link: own gain `|g_ii(t)|²`, received
/// interference power `Σ p_j(t)|g_ij(t)|²`, and noise variance `σ²(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FadingTrace {
    pub own_gain: Vec<f64>,
    pub interference: Vec<f64>,
    pub noise_var: Vec<f64>,
}

impl FadingTrace {
    pub fn new(own_gain: Vec<f64>, interference: Vec<f64>, noise_var: Vec<f64>) -> Result<Self> {
        let n = own_gain.len();
        if interference.len() != n || noise_var.len() != n {
            return Err(Error::shape(&[n, n, n], &[own_gain.len(), interference.len(), noise_var.len()]));
        }
        let t = FadingTrace { own_gain, interference, noise_var };
        let all = t.own_gain.iter().chain(&t.interference).chain(&t.noise_var);
        if all.clone().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams("trace entries must be finite and ≥ 0".into()));
        }
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.own_gain.len()
    }

    pub fn is_empty(&self) -> bool {
        self.own_gain.is_empty()
    }

    fn impairment(&self, t: usize) -> f64 {
        self.interference[t] + self.noise_var[t]
    }
}

/// Rayleigh trace. The own gain averages `diversity` independent `Exp(1)`
/// branches (a single branch gives `1/|g|²` an infinite mean); each
/// interferer contributes `p_j · Exp(1)`. Chunks draw from forks of `rng`,
/// so the trace does not depend on `exec`.
pub fn rayleigh_trace(
    trials: usize,
    diversity: usize,
    interferer_powers: &[f64],
    noise_var: f64,
    rng: &SeededRng,
    exec: Exec,
) -> Result<FadingTrace> {
    if diversity == 0 {
        return Err(Error::InvalidParams("diversity must be ≥ 1".into()));
    }
    if !(noise_var >= 0.0) || interferer_powers.iter().any(|p| !(*p >= 0.0)) {
        return Err(Error::InvalidParams("powers and noise must be ≥ 0".into()));
    }
    let chunks = trials.div_ceil(CHUNK);
    let parts = exec.map(chunks, |c| {
        let mut r = rng.fork(c as u64);
        let len = CHUNK.min(trials - c * CHUNK);
        let mut own = Vec::with_capacity(len);
        let mut intf = Vec::with_capacity(len);
        let exp = |r: &mut SeededRng| -r.uniform().ln_1p_neg();
        for _ in 0..len {
            own.push((0..diversity).map(|_| exp(&mut r)).sum::<f64>() / diversity as f64);
            intf.push(interferer_powers.iter().map(|p| p * exp(&mut r)).sum::<f64>());
        }
        (own, intf)
    });
    let mut own_gain = Vec::with_capacity(trials);
    let mut interference = Vec::with_capacity(trials);
    for (o, i) in parts {
        own_gain.extend(o);
        interference.extend(i);
    }
    FadingTrace::new(own_gain, interference, vec![noise_var; trials])
}

trait Ln1pNeg {
    fn ln_1p_neg(self) -> f64;
}

impl Ln1pNeg for f64 {
    /// `ln(1 − u)`, finite for `u ∈ [0, 1)`.
    fn ln_1p_neg(self) -> f64 {
        (-self).ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedPower {
    /// Nearest-rank `q`-quantile of the per-realization required power.
    Percentile(f64),
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Fixed(FixedPower),
    /// Per-realization power control. With a mean-power budget the user
    /// inverts the channel only on the cheapest realizations that fit the
    /// budget and stays silent otherwise.
    Adaptive {
        budget: Option<f64>,
    },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Fixed(_) => "fixed",
            Policy::Adaptive { .. } => "adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub policy: Policy,
    pub outage: f64,
    /// Per-realization accuracy, sorted ascending (an empirical CDF).
    pub accuracy: Vec<f64>,
    pub mean_power: f64,
    /// `10·log10(mean_power)`, treating powers as milliwatts.
    pub mean_power_dbm: f64,
    /// Per-realization transmit power in trace order.
    pub power: Vec<f64>,
}

/// Nearest-rank quantile of unsorted data.
fn nearest_rank(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

/// Largest cutoff `c` such that inverting every realization with required
/// power `≤ c` keeps the mean power within `budget`.
fn inversion_cutoff(required: &[f64], budget: f64) -> f64 {
    let mut v = required.to_vec();
    v.sort_by(f64::total_cmp);
    let cap = budget * v.len() as f64;
    let mut spent = 0.0;
    let mut cutoff = f64::NEG_INFINITY;
    for r in v {
        if spent + r > cap {
            break;
        }
        spent += r;
        cutoff = r;
    }
    cutoff
}

/// Fixed versus adaptive power on a shared trace.
pub fn outage_sim(
    params: &AbgParams,
    eta: f64,
    trace: &FadingTrace,
    policy: Policy,
    exec: Exec,
) -> Result<OutageReport> {
    params.validate()?;
    check_target(params, eta)?;
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty fading trace".into()));
    }
    if trace.own_gain.iter().any(|&g| g <= 0.0) {
        return Err(Error::ZeroDenominator("own channel gain"));
    }
    let n = trace.len();
    let chunks = n.div_ceil(CHUNK);
    let required: Vec<f64> = exec
        .map(chunks, |c| {
            (c * CHUNK..n.min((c + 1) * CHUNK))
                .map(|t| required_power(params, eta, trace.own_gain[t], trace.impairment(t)))
                .collect::<Vec<_>>()
        })
        .concat();
    let power: Vec<f64> = match policy {
        Policy::Fixed(FixedPower::Percentile(q)) => {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::InvalidProbability(q));
            }
            vec![nearest_rank(&required, q); n]
        }
        Policy::Fixed(FixedPower::Value(p)) => {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidParams(format!("fixed power must be finite and ≥ 0, got {p}")));
            }
            vec![p; n]
        }
        Policy::Adaptive { budget: None } => required.clone(),
        Policy::Adaptive { budget: Some(b) } => {
            if !(b >= 0.0) {
                return Err(Error::InvalidParams(format!("power budget must be ≥ 0, got {b}")));
            }
            let cutoff = inversion_cutoff(&required, b);
            required.iter().map(|&r| if r <= cutoff { r } else { 0.0 }).collect()
        }
    };
    let parts = exec.map(chunks, |c| {
        let mut acc = Vec::with_capacity(CHUNK);
        let mut out = 0usize;
        for t in c * CHUNK..n.min((c + 1) * CHUNK) {
            let s = sinr_linear(power[t], trace.own_gain[t], trace.impairment(t));
            let a = params.eval_unchecked(s);
            if a < eta - OUTAGE_TOL {
                out += 1;
            }
            acc.push(a);
        }
        (acc, out)
    });
    let outages: usize = parts.iter().map(|p| p.1).sum();
    let mut accuracy: Vec<f64> = parts.into_iter().flat_map(|p| p.0).collect();
    accuracy.sort_by(f64::total_cmp);
    let mean_power = power.iter().sum::<f64>() / n as f64;
    Ok(OutageReport {
        policy,
        outage: outages as f64 / n as f64,
        accuracy,
        mean_power,
        mean_power_dbm: 10.0 * mean_power.log10(),
        power,
    })
}
