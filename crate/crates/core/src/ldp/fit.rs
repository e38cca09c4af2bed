//! Binomial intervals and log-linear rate fits.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `hits` successes out of `n`.
pub fn wilson_interval(hits: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the bounds are exactly 0 and 1 at degenerate counts; keep rounding out of them
    let lo = if hits == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if hits as f64 == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// One point of a log-linear fit: −ln p against 1/ε².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub epsilon: f64,
    pub p_hat: f64,
    /// Inverse variance of ln p̂; any positive value for exact data.
    pub weight: f64,
}

impl RatePoint {
    /// Weight n p̂/(1 − p̂), the delta-method inverse variance of ln p̂.
    pub fn from_counts(epsilon: f64, hits: u64, n: u64) -> Self {
        let p_hat = if n > 0 { hits as f64 / n as f64 } else { 0.0 };
        let weight = if hits == 0 {
            0.0
        } else if hits == n {
            n as f64
        } else {
            hits as f64 / (1.0 - p_hat)
        };
        RatePoint { epsilon, p_hat, weight }
    }

    fn usable(&self) -> bool {
        self.p_hat > 0.0 && self.weight > 0.0 && self.epsilon > 0.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// y − (slope·x + intercept) per usable point, in input order.
    pub residuals: Vec<f64>,
}

/// Weighted least squares y = slope·x + intercept; needs two distinct x.
pub fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    if x.len() < 2 || !(sw > 0.0) {
        return None;
    }
    let mx = x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| b * (a - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| b * (a - mx) * (c - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Weighted least squares of −ln p̂ against 1/ε². Points with p̂ = 0 are
/// skipped; fewer than 3 usable points is an error.
pub fn rate_slope_fit(points: &[RatePoint]) -> Result<SlopeFit> {
    let used: Vec<&RatePoint> = points.iter().filter(|p| p.usable()).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "rate fit needs 3 points with nonzero counts, got {}",
            used.len()
        )));
    }
    let x: Vec<f64> = used.iter().map(|p| 1.0 / (p.epsilon * p.epsilon)).collect();
    let y: Vec<f64> = used.iter().map(|p| -p.p_hat.ln()).collect();
    let w: Vec<f64> = used.iter().map(|p| p.weight).collect();
    let (slope, intercept) = weighted_line(&x, &y, &w)
        .ok_or_else(|| Error::InsufficientData("rate fit needs distinct epsilons".into()))?;
    let residuals = x.iter().zip(&y).map(|(a, b)| b - (slope * a + intercept)).collect();
    Ok(SlopeFit { slope, intercept, residuals })
}
