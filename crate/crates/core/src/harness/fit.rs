//! Rate fitting and envelope checks on time series.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateKind {
    Exponential,
    Polynomial,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub lambda_fit: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub kind: RateKind,
}

/// Least-squares fit of `log v = intercept − λ t` over `window` (the whole
/// series when `None`).
pub fn fit_exponential(times: &[f64], values: &[f64], window: Option<(f64, f64)>) -> Result<RateReport> {
    if times.len() != values.len() {
        return Err(Error::Invalid("times and values differ in length".into()));
    }
    let (lo, hi) = window.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let mut pts = Vec::new();
    for (&t, &v) in times.iter().zip(values) {
        if t < lo || t > hi {
            continue;
        }
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue(v));
        }
        pts.push((t, v.ln()));
    }
    if pts.len() < 5 {
        return Err(Error::TooFewPoints { needed: 5, got: pts.len() });
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(t, y) in &pts {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (y - ym);
        syy += (y - ym) * (y - ym);
    }
    if sxx == 0.0 {
        return Err(Error::Invalid("fit window has a single time".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    let window = (pts[0].0, pts[pts.len() - 1].0);
    Ok(RateReport {
        lambda_fit: -slope,
        intercept: ym - slope * tm,
        r_squared,
        window,
        kind: RateKind::Exponential,
    })
}

/// Default window: drop the first 10% of the time span and everything from
/// the first sample below `floor` on.
pub fn default_window(times: &[f64], values: &[f64], floor: f64) -> (f64, f64) {
    let (t0, t1) = (times[0], times[times.len() - 1]);
    let lo = t0 + 0.1 * (t1 - t0);
    let hi = times
        .iter()
        .zip(values)
        .find(|(_, v)| **v < floor)
        .map(|(t, _)| *t)
        .unwrap_or(t1);
    let hi_kept = times.iter().copied().filter(|&t| t < hi || hi == t1).fold(lo, f64::max);
    (lo, hi_kept)
}

/// Largest `c` with `v(t) ≤ (v(0)^{−p} + c t)^{−1/p}` at every sample, and
/// whether it reaches `c_theory`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolynomialFit {
    pub c_fit: f64,
    pub holds: bool,
}

pub fn fit_polynomial_envelope(times: &[f64], values: &[f64], p: f64, c_theory: f64) -> Result<PolynomialFit> {
    if !(p > 0.0) {
        return Err(Error::Invalid(format!("p must be positive, got {p}")));
    }
    if times.len() != values.len() || times.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: times.len().min(values.len()) });
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::NonPositiveValue(*v));
    }
    let (t0, v0) = (times[0], values[0]);
    let c_fit = times
        .iter()
        .zip(values)
        .skip(1)
        .map(|(&t, &v)| (v.powf(-p) - v0.powf(-p)) / (t - t0))
        .fold(f64::INFINITY, f64::min);
    Ok(PolynomialFit {
        c_fit,
        holds: c_fit >= c_theory,
    })
}

/// Samples violating `v(t) ≤ (1 + slack)(v(0)^{−p} + c (t − t0))^{−1/p}`.
/// Samples below `floor` are under the resolution limit and not assessed.
pub fn polynomial_envelope_violations(times: &[f64], values: &[f64], p: f64, c: f64, slack: f64, floor: f64) -> Vec<usize> {
    let (t0, v0) = (times[0], values[0]);
    (0..times.len())
        .filter(|&k| values[k] >= floor && values[k] > (1.0 + slack) * (v0.powf(-p) + c * (times[k] - t0)).powf(-1.0 / p))
        .collect()
}

/// Samples violating `v(t) ≤ (1 + slack) e^{−rate (t − t0)} v(0)`, with
/// the same `floor` as [`polynomial_envelope_violations`].
pub fn exponential_envelope_violations(times: &[f64], values: &[f64], rate: f64, slack: f64, floor: f64) -> Vec<usize> {
    let (t0, v0) = (times[0], values[0]);
    (0..times.len())
        .filter(|&k| values[k] >= floor && values[k] > (1.0 + slack) * (-rate * (times[k] - t0)).exp() * v0)
        .collect()
}
