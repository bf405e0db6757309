//! Differential entropy of one received dimension given the own symbol.
//!
//! With interferer symbols uniform on ±1, `y_r | x_r` is an equal-weight
//! mixture of `2^(N−1)` circular complex Gaussians of variance σ². The
//! entropy `−∫ f ln f` is evaluated by trapezoidal quadrature, refined by
//! halving the step until successive estimates agree. The box extends
//! `6σ` past the outermost component mean.
//!
//! When all component means are collinear (always the case for a single
//! interferer) the density factors into a Gaussian across the line and a
//! 1-D mixture along it, and only the 1-D integral is computed.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const MAX_INTERFERERS: usize = 12;

const TOL: f64 = 1e-11;
const EXTENT_SIGMAS: f64 = 6.0;

/// Component means `own + Σ_j s_j √p_j g_j` for every sign pattern `s`.
pub fn mixture_components(own_mean: Complex64, interferers: &[(f64, Complex64)]) -> Vec<Complex64> {
    let m = interferers.len();
    (0..1usize << m)
        .map(|mask| {
            interferers.iter().enumerate().fold(own_mean, |acc, (j, &(p, g))| {
                let s = if mask >> j & 1 == 1 { 1.0 } else { -1.0 };
                acc + g * (s * p.sqrt())
            })
        })
        .collect()
}

/// Entropy in nats of `y = own_mean + Σ_j √p_j g_j b_j + n`, `b_j` uniform
/// on ±1 and `n ~ CN(0, σ²)`. `own_mean` is the received own contribution
/// `g_ii √p_i x_r`. With no (or silent) interferers this is `ln(π e σ²)`.
pub fn cond_output_entropy(own_mean: Complex64, interferers: &[(f64, Complex64)], noise_var: f64) -> Result<f64> {
    if interferers.len() > MAX_INTERFERERS {
        return Err(Error::TooManyInterferers(interferers.len()));
    }
    if !(noise_var > 0.0) || !noise_var.is_finite() {
        return Err(Error::InvalidParams(format!("noise variance must be positive, got {noise_var}")));
    }
    if interferers.iter().any(|&(p, g)| !(p >= 0.0) || !p.is_finite() || !g.re.is_finite() || !g.im.is_finite()) {
        return Err(Error::InvalidParams("interferer power/gain must be finite with p ≥ 0".into()));
    }
    let means = mixture_components(own_mean, interferers);
    let sigma = noise_var.sqrt();
    let comps = merge_coincident(&means, sigma);
    let gaussian = (std::f64::consts::PI * std::f64::consts::E * noise_var).ln();
    if comps.len() == 1 {
        return Ok(gaussian);
    }
    if let Some(line) = collinear_coordinates(&comps, sigma) {
        // Across-line factor is a real Gaussian of variance σ²/2.
        let across = 0.5 * (std::f64::consts::PI * std::f64::consts::E * noise_var).ln();
        return Ok(entropy_1d(&line, noise_var / 2.0) + across);
    }
    Ok(entropy_2d(&comps, noise_var))
}

/// Weighted distinct means.
fn merge_coincident(means: &[Complex64], sigma: f64) -> Vec<(Complex64, f64)> {
    let w = 1.0 / means.len() as f64;
    let eps = 1e-12 * sigma.max(1.0);
    let mut out: Vec<(Complex64, f64)> = Vec::new();
    for &m in means {
        match out.iter_mut().find(|(c, _)| (c - m).norm() <= eps) {
            Some((_, cw)) => *cw += w,
            None => out.push((m, w)),
        }
    }
    out
}

/// Positions along the common line, if all means are collinear.
fn collinear_coordinates(comps: &[(Complex64, f64)], sigma: f64) -> Option<Vec<(f64, f64)>> {
    let (mut a, mut b, mut far) = (0, 0, 0.0);
    for i in 0..comps.len() {
        for j in i + 1..comps.len() {
            let dist = (comps[i].0 - comps[j].0).norm();
            if dist > far {
                (a, b, far) = (i, j, dist);
            }
        }
    }
    let origin = comps[a].0;
    let dir = (comps[b].0 - origin) / far;
    let eps = 1e-12 * (far + sigma);
    let mut line = Vec::with_capacity(comps.len());
    for &(m, w) in comps {
        let rel = (m - origin) * dir.conj();
        if rel.im.abs() > eps {
            return None;
        }
        line.push((rel.re, w));
    }
    Some(line)
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

fn neg_f_ln_f(ln_f: f64) -> f64 {
    if ln_f == f64::NEG_INFINITY {
        0.0
    } else {
        -ln_f.exp() * ln_f
    }
}

/// Entropy of a 1-D mixture of Gaussians of variance `var`.
fn entropy_1d(comps: &[(f64, f64)], var: f64) -> f64 {
    let sd = var.sqrt();
    let lo = comps.iter().map(|c| c.0).fold(f64::INFINITY, f64::min) - EXTENT_SIGMAS * (2.0 * var).sqrt();
    let hi = comps.iter().map(|c| c.0).fold(f64::NEG_INFINITY, f64::max) + EXTENT_SIGMAS * (2.0 * var).sqrt();
    let log_norm = -0.5 * (2.0 * std::f64::consts::PI * var).ln();
    let ln_w: Vec<(f64, f64)> = comps.iter().map(|&(m, w)| (m, w.ln() + log_norm)).collect();
    let integrand = |t: f64| neg_f_ln_f(log_sum_exp(ln_w.iter().map(|&(m, lw)| lw - (t - m) * (t - m) / (2.0 * var))));
    let mut n = (((hi - lo) / (0.5 * sd)).ceil() as usize).max(16);
    let mut prev = trapezoid_1d(&integrand, lo, hi, n);
    for _ in 0..12 {
        n *= 2;
        let next = trapezoid_1d(&integrand, lo, hi, n);
        if (next - prev).abs() <= TOL * next.abs().max(1.0) {
            return next;
        }
        prev = next;
    }
    prev
}

fn trapezoid_1d(f: &impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let inner: f64 = (1..n).map(|k| f(lo + k as f64 * h)).sum();
    h * (inner + 0.5 * (f(lo) + f(hi)))
}

/// Entropy of a circular complex Gaussian mixture over a 2-D grid.
fn entropy_2d(comps: &[(Complex64, f64)], noise_var: f64) -> f64 {
    let sd = (noise_var / 2.0).sqrt();
    let pad = EXTENT_SIGMAS * noise_var.sqrt();
    let (mut re_lo, mut re_hi, mut im_lo, mut im_hi) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (m, _) in comps {
        re_lo = re_lo.min(m.re);
        re_hi = re_hi.max(m.re);
        im_lo = im_lo.min(m.im);
        im_hi = im_hi.max(m.im);
    }
    let (re_lo, re_hi, im_lo, im_hi) = (re_lo - pad, re_hi + pad, im_lo - pad, im_hi + pad);
    let log_norm = -(std::f64::consts::PI * noise_var).ln();
    let ln_w: Vec<(Complex64, f64)> = comps.iter().map(|&(m, w)| (m, w.ln() + log_norm)).collect();
    let integrand = |x: f64, y: f64| {
        neg_f_ln_f(log_sum_exp(ln_w.iter().map(|&(m, lw)| {
            let (dx, dy) = (x - m.re, y - m.im);
            lw - (dx * dx + dy * dy) / noise_var
        })))
    };
    let mut step = 0.5 * sd;
    let mut prev = trapezoid_2d(&integrand, (re_lo, re_hi), (im_lo, im_hi), step);
    for _ in 0..6 {
        step /= 2.0;
        let next = trapezoid_2d(&integrand, (re_lo, re_hi), (im_lo, im_hi), step);
        if (next - prev).abs() <= TOL * next.abs().max(1.0) {
            return next;
        }
        prev = next;
    }
    prev
}

fn trapezoid_2d(f: &impl Fn(f64, f64) -> f64, xr: (f64, f64), yr: (f64, f64), step: f64) -> f64 {
    let nx = (((xr.1 - xr.0) / step).ceil() as usize).max(16);
    let ny = (((yr.1 - yr.0) / step).ceil() as usize).max(16);
    let hx = (xr.1 - xr.0) / nx as f64;
    let hy = (yr.1 - yr.0) / ny as f64;
    let wt = |k: usize, n: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    for a in 0..=nx {
        let x = xr.0 + a as f64 * hx;
        let mut row = 0.0;
        for b in 0..=ny {
            row += wt(b, ny) * f(x, yr.0 + b as f64 * hy);
        }
        acc += wt(a, nx) * row;
    }
    acc * hx * hy
}
