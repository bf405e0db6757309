//! Accuracy–SINR model `φ = α − γ / (1 + (β·SINR)^τ)`, its least-squares
//! fit, closed-form power control and outage simulation under fading.

mod fit;
mod outage;

pub use fit::{abg_fit, adjusted_r2, FitReport};
pub use outage::{outage_sim, rayleigh_trace, FadingTrace, FixedPower, OutageReport, Policy};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracies are in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AbgParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tau: f64,
}

impl AbgParams {
    pub const fn new(alpha: f64, beta: f64, gamma: f64, tau: f64) -> Self {
        AbgParams { alpha, beta, gamma, tau }
    }

    pub fn validate(&self) -> Result<()> {
        let AbgParams { alpha, beta, gamma, tau } = *self;
        if !alpha.is_finite()
            || !(beta > 0.0 && gamma > 0.0 && tau > 0.0)
            || ![beta, gamma, tau].iter().all(|v| v.is_finite())
        {
            return Err(Error::InvalidParams(format!("ABG parameters need finite α and β, γ, τ > 0: {self:?}")));
        }
        Ok(())
    }

    /// Accuracy floor `α − γ` at zero SINR.
    pub fn floor(&self) -> f64 {
        self.alpha - self.gamma
    }

    fn eval_unchecked(&self, sinr: f64) -> f64 {
        self.alpha - self.gamma / (1.0 + (self.beta * sinr).powf(self.tau))
    }

    /// `∂φ/∂(α, β, γ, τ)` at `sinr`.
    pub fn gradient(&self, sinr: f64) -> [f64; 4] {
        let bs = self.beta * sinr;
        if bs <= 0.0 {
            return [1.0, 0.0, -1.0, 0.0];
        }
        let u = bs.powf(self.tau);
        let d = 1.0 + u;
        let common = self.gamma / (d * d) * u;
        [1.0, common * self.tau / self.beta, -1.0 / d, common * bs.ln()]
    }
}

pub fn abg_eval(params: &AbgParams, sinr: f64) -> Result<f64> {
    params.validate()?;
    if !(sinr >= 0.0) {
        return Err(Error::InvalidParams(format!("SINR must be ≥ 0, got {sinr}")));
    }
    Ok(params.eval_unchecked(sinr))
}

/// Power that makes receiver accuracy exactly `eta`:
/// `p* = (I + σ²)/(β|g_ii|²) · (γ/(α − η) − 1)^(1/τ)`, with
/// `I = Σ_j p_j|g_ij|²` over the given `(p_j, |g_ij|²)` interferers.
pub fn power_control(
    params: &AbgParams,
    eta: f64,
    own_gain: f64,
    interferers: &[(f64, f64)],
    noise_var: f64,
) -> Result<f64> {
    params.validate()?;
    check_target(params, eta)?;
    if !(own_gain > 0.0) || !own_gain.is_finite() {
        return Err(Error::ZeroDenominator("own channel gain"));
    }
    if !(noise_var >= 0.0) || interferers.iter().any(|&(p, g)| !(p >= 0.0) || !(g >= 0.0)) {
        return Err(Error::InvalidParams("powers, gains and noise must be ≥ 0".into()));
    }
    let interference: f64 = interferers.iter().map(|(p, g)| p * g).sum();
    Ok(required_power(params, eta, own_gain, interference + noise_var))
}

pub(crate) fn check_target(params: &AbgParams, eta: f64) -> Result<()> {
    // Targets within rounding of the floor would need zero power and are
    // treated as the floor itself.
    let eps = 1e-12 * params.alpha.abs().max(1.0);
    if !(eta > params.floor() + eps && eta < params.alpha) {
        return Err(Error::Infeasible { eta, lo: params.floor(), hi: params.alpha });
    }
    Ok(())
}

/// SINR needed for `eta`, `(γ/(α−η) − 1)^(1/τ) / β`.
pub(crate) fn required_sinr(params: &AbgParams, eta: f64) -> f64 {
    (params.gamma / (params.alpha - eta) - 1.0).powf(1.0 / params.tau) / params.beta
}

pub(crate) fn required_power(params: &AbgParams, eta: f64, own_gain: f64, impairment: f64) -> f64 {
    impairment / own_gain * required_sinr(params, eta)
}

/// Joint fixed point of per-user power control: each user reacts to the
/// others' current powers until the largest change is below `1e-9`.
/// `gains[i][j] = |g_ij|²`.
pub fn power_control_fixed_point(
    params: &[AbgParams],
    eta: &[f64],
    gains: &[Vec<f64>],
    noise_var: &[f64],
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = params.len();
    if eta.len() != n || gains.len() != n || noise_var.len() != n || gains.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidParams("per-user inputs must all have N entries".into()));
    }
    let mut p = vec![0.0; n];
    for _ in 0..max_iter {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let intf: Vec<(f64, f64)> = (0..n).filter(|&j| j != i).map(|j| (p[j], gains[i][j])).collect();
                power_control(&params[i], eta[i], gains[i][i], &intf, noise_var[i])
            })
            .collect::<Result<_>>()?;
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if !p.iter().all(|v| v.is_finite()) {
            break;
        }
        if change < 1e-9 {
            return Ok(p);
        }
    }
    Err(Error::InvalidParams(format!(
        "power control did not settle within {max_iter} iterations (targets jointly infeasible?)"
    )))
}

/// SINR of a user with transmit power `p`.
pub fn sinr_linear(p: f64, own_gain: f64, impairment: f64) -> f64 {
    if impairment == 0.0 {
        return f64::INFINITY;
    }
    p * own_gain / impairment
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: AbgParams = AbgParams::new(91.95, 10.50, 81.90, 1.329);

    #[test]
    fn reference_points() {
        assert!((abg_eval(&REFERENCE, 1e30).unwrap() - 91.95).abs() < 1e-9);
        assert!((abg_eval(&REFERENCE, 0.0).unwrap() - 10.05).abs() < 1e-12);
        assert!((abg_eval(&REFERENCE, 1.0 / 10.5).unwrap() - 51.0).abs() < 1e-12);
        assert!(abg_eval(&REFERENCE, -1.0).is_err());
        assert!(abg_eval(&AbgParams::new(90.0, 0.0, 1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn strictly_increasing() {
        let mut prev = abg_eval(&REFERENCE, 0.0).unwrap();
        for k in 1..2000 {
            let v = abg_eval(&REFERENCE, k as f64 * 1e-3).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn power_control_closed_form() {
        let p = power_control(&REFERENCE, 90.0, 1.0, &[], 1.0).unwrap();
        // mpmath: (81.9/1.95 − 1)^(1/1.329) / 10.5
        assert!((p - 1.557_193_463_508_845_8).abs() < 1e-12);
        assert!((abg_eval(&REFERENCE, p).unwrap() - 90.0).abs() < 1e-9);
        let half = power_control(&REFERENCE, 91.95 - 81.9 / 2.0, 1.0, &[], 1.0).unwrap();
        assert!((half - 1.0 / 10.5).abs() < 1e-15);
        let doubled = power_control(&REFERENCE, 90.0, 1.0, &[], 2.0).unwrap();
        assert!((doubled - 2.0 * p).abs() < 1e-12);
    }

    #[test]
    fn infeasible_targets() {
        for eta in [92.0, 91.95, 10.05, 5.0] {
            match power_control(&REFERENCE, eta, 1.0, &[], 1.0) {
                Err(Error::Infeasible { lo, hi, .. }) => {
                    assert!((lo - 10.05).abs() < 1e-12);
                    assert_eq!(hi, 91.95);
                }
                other => panic!("{other:?}"),
            }
        }
        assert!(matches!(power_control(&REFERENCE, 80.0, 0.0, &[], 1.0), Err(Error::ZeroDenominator(_))));
    }

    #[test]
    fn fixed_point_meets_every_target() {
        let params = [REFERENCE, REFERENCE];
        let gains = vec![vec![1.0, 0.1], vec![0.2, 0.8]];
        let p = power_control_fixed_point(&params, &[80.0, 85.0], &gains, &[1.0, 0.5], 1000).unwrap();
        for i in 0..2 {
            let j = 1 - i;
            let s = sinr_linear(p[i], gains[i][i], p[j] * gains[i][j] + [1.0, 0.5][i]);
            assert!((abg_eval(&REFERENCE, s).unwrap() - [80.0, 85.0][i]).abs() < 1e-6);
        }
        let strong = vec![vec![1.0, 10.0], vec![10.0, 1.0]];
        assert!(power_control_fixed_point(&params, &[90.0, 90.0], &strong, &[1.0, 1.0], 500).is_err());
    }
}
