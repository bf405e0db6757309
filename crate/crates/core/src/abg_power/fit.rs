use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use super::AbgParams;
use crate::error::{Error, Result};

const LAMBDA0: f64 = 1e-3;
const MAX_ITER: usize = 200;
const TINY: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: AbgParams,
    pub adjusted_r2: f64,
    /// `data − model` per point.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Constant data: the span γ sits at its lower boundary.
    pub degenerate: bool,
}

/// `1 − (1 − R²)(n − 1)/(n − k − 1)`, `R² = 1 − SSE/SST`.
pub fn adjusted_r2(residuals: &[f64], data: &[f64], k: usize) -> Result<f64> {
    let n = data.len();
    if residuals.len() != n {
        return Err(Error::shape(&[n], &[residuals.len()]));
    }
    if n <= k + 1 {
        return Err(Error::InsufficientData(format!("{n} points for {k} parameters")));
    }
    let mean = data.iter().sum::<f64>() / n as f64;
    let sst: f64 = data.iter().map(|y| (y - mean) * (y - mean)).sum();
    if sst == 0.0 {
        return Err(Error::ZeroDenominator("total sum of squares"));
    }
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let r2 = 1.0 - sse / sst;
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - k - 1) as f64)
}

fn project(p: Vector4<f64>) -> Vector4<f64> {
    Vector4::new(p[0].clamp(0.0, 100.0), p[1].max(TINY), p[2].max(TINY), p[3].max(TINY))
}

fn params_of(p: &Vector4<f64>) -> AbgParams {
    AbgParams::new(p[0], p[1], p[2], p[3])
}

fn residuals(p: &Vector4<f64>, pts: &[(f64, f64)]) -> Vec<f64> {
    let m = params_of(p);
    pts.iter().map(|&(s, y)| y - m.eval_unchecked(s)).collect()
}

fn sse(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn jacobian_row(p: &Vector4<f64>, s: f64) -> Vector4<f64> {
    Vector4::from(params_of(p).gradient(s))
}

struct Run {
    p: Vector4<f64>,
    sse: f64,
    iterations: usize,
    converged: bool,
}

/// Levenberg–Marquardt with Marquardt diagonal scaling from one start.
fn lm(start: Vector4<f64>, pts: &[(f64, f64)]) -> Run {
    let mut p = project(start);
    let mut r = residuals(&p, pts);
    let mut cost = sse(&r);
    let mut lambda = LAMBDA0;
    let scale = pts.iter().map(|q| q.1 * q.1).sum::<f64>().max(1.0);
    for it in 1..=MAX_ITER {
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&(s, _), &ri) in pts.iter().zip(&r) {
            let j = jacobian_row(&p, s);
            jtj += j * j.transpose();
            jtr += j * ri;
        }
        if jtr.amax() <= 1e-14 * scale || cost <= 1e-30 * scale {
            return Run { p, sse: cost, iterations: it - 1, converged: true };
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj;
            for k in 0..4 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let cand = project(p + delta);
            let cr = residuals(&cand, pts);
            let cc = sse(&cr);
            if cc.is_finite() && cc < cost {
                let rel = (cost - cc) / cost.max(f64::MIN_POSITIVE);
                let step = (cand - p).amax() / p.amax().max(1.0);
                p = cand;
                r = cr;
                cost = cc;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel < 1e-15 || step < 1e-15 {
                    return Run { p, sse: cost, iterations: it, converged: true };
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a stationary point.
            return Run { p, sse: cost, iterations: it, converged: true };
        }
    }
    Run { p, sse: cost, iterations: MAX_ITER, converged: false }
}

/// Least-squares fit of `(sinr, accuracy %)` points, multi-started over a
/// log-spaced `(β, τ)` grid; the best start by SSE is returned.
pub fn abg_fit(points: &[(f64, f64)], multistart: usize) -> Result<FitReport> {
    if points.len() < 5 {
        return Err(Error::InsufficientData(format!("{} points; the fit needs at least 5", points.len())));
    }
    if points.iter().any(|&(s, y)| !(s >= 0.0) || !s.is_finite() || !y.is_finite()) {
        return Err(Error::InvalidParams("SINR must be finite and ≥ 0, accuracies finite".into()));
    }
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let (lo, hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &y| (a.0.min(y), a.1.max(y)));
    if hi == lo {
        // Constant accuracy: the span collapses and the fit is exact.
        let params = AbgParams::new(lo, 1.0, f64::MIN_POSITIVE, 1.0);
        let residuals = residuals(&Vector4::new(params.alpha, params.beta, params.gamma, params.tau), points);
        return Ok(FitReport { params, adjusted_r2: 1.0, residuals, iterations: 0, converged: true, degenerate: true });
    }
    let positive: Vec<f64> = points.iter().map(|p| p.0).filter(|&s| s > 0.0).collect();
    if positive.is_empty() {
        return Err(Error::InsufficientData("all SINR values are zero".into()));
    }
    let (smin, smax) = positive.iter().fold((f64::INFINITY, 0.0f64), |a, &s| (a.0.min(s), a.1.max(s)));
    let side = (multistart.max(1) as f64).sqrt().ceil() as usize;
    let grid = |k: usize, lo: f64, hi: f64| -> f64 {
        if side == 1 {
            (lo * hi).sqrt()
        } else {
            (lo.ln() + (hi.ln() - lo.ln()) * k as f64 / (side - 1) as f64).exp()
        }
    };
    let (b_lo, b_hi) = (1.0 / smax, (1.0 / smin).max(1.0 / smax * 10.0));
    let span = (hi - lo).max(1e-6);
    let mut best: Option<Run> = None;
    let mut total_iter = 0;
    let mut starts = 0;
    'outer: for bi in 0..side {
        for ti in 0..side {
            if starts == multistart.max(1) {
                break 'outer;
            }
            starts += 1;
            let start = Vector4::new(hi.min(100.0), grid(bi, b_lo, b_hi), span, grid(ti, 0.5, 4.0));
            let run = lm(start, points);
            total_iter += run.iterations;
            if best.as_ref().is_none_or(|b| run.sse < b.sse) {
                best = Some(run);
            }
        }
    }
    let run = best.expect("at least one start");
    let residuals = residuals(&run.p, points);
    let adjusted = adjusted_r2(&residuals, &ys, 4)?;
    Ok(FitReport {
        params: params_of(&run.p),
        adjusted_r2: adjusted,
        residuals,
        iterations: total_iter,
        converged: run.converged,
        degenerate: false,
    })
}
