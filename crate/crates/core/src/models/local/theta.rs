//! Theta method: average of the extrapolated regression line (theta = 0) and
//! exponential smoothing of the theta = 2 line, with optional multiplicative
//! deseasonalisation.

use serde::{Deserialize, Serialize};

use super::ets::golden;
use crate::forecast::QuantileLevels;
use crate::models::gaussian_quantiles;

const ALPHA_LO: f64 = 1e-4;
const ALPHA_HI: f64 = 0.9999;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFit {
    pub intercept: f64,
    /// Slope of the regression line, also the drift of the smoothed line.
    pub drift: f64,
    pub alpha: f64,
    /// Smoothed theta = 2 line at the last observation.
    pub level: f64,
    /// Number of observations; the line is indexed from 0.
    pub n: usize,
    pub sigma: f64,
    /// Multiplicative seasonal indices in forecast order; empty when the
    /// series was not deseasonalised.
    pub seasonal: Vec<f64>,
}

pub fn fit(y: &[f64], m: usize) -> ThetaFit {
    let n = y.len();
    if y.iter().all(|&v| v == y[0]) {
        return ThetaFit { intercept: y[0], drift: 0.0, alpha: 0.5, level: y[0], n, sigma: 0.0, seasonal: Vec::new() };
    }

    let index = if seasonal_test(y, m) { seasonal_indices(y, m) } else { Vec::new() };
    let adjusted: Vec<f64> = if index.is_empty() { y.to_vec() } else { y.iter().enumerate().map(|(t, v)| v / index[t % m]).collect() };

    let (a, b) = ols_line(&adjusted);
    let z: Vec<f64> = adjusted.iter().enumerate().map(|(t, v)| 2.0 * v - (a + b * t as f64)).collect();
    let sse = |alpha: f64| ses_drift(&z, b, alpha).1;

    let mut alpha = 0.5;
    let mut best = f64::INFINITY;
    for k in 0..10 {
        let cand = 0.05 + 0.1 * k as f64;
        let s = sse(cand);
        if s < best {
            best = s;
            alpha = cand;
        }
    }
    alpha = golden(sse, (alpha - 0.1).max(ALPHA_LO), (alpha + 0.1).min(ALPHA_HI), alpha);
    let (level, _, fitted) = ses_drift(&z, b, alpha);

    let mut se = 0.0;
    for t in 1..n {
        let combined = 0.5 * (a + b * t as f64) + 0.5 * fitted[t];
        let e = adjusted[t] - combined;
        se += e * e;
    }
    let sigma = (se / (n - 1) as f64).sqrt();
    let seasonal = if index.is_empty() { Vec::new() } else { (0..m).map(|j| index[(n + j) % m]).collect() };
    ThetaFit { intercept: a, drift: b, alpha, level, n, sigma, seasonal }
}

/// Exponential smoothing with a fixed drift. Returns the final level, the
/// one-step SSE and the one-step fitted values (index 0 unused).
fn ses_drift(z: &[f64], drift: f64, alpha: f64) -> (f64, f64, Vec<f64>) {
    let mut level = z[0];
    let mut sse = 0.0;
    let mut fitted = vec![z[0]; z.len()];
    for t in 1..z.len() {
        let f = level + drift;
        fitted[t] = f;
        let e = z[t] - f;
        sse += e * e;
        level = alpha * z[t] + (1.0 - alpha) * f;
    }
    (level, sse, fitted)
}

/// Least-squares line `a + b t` over `t = 0..n`.
fn ols_line(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let t_mean = (n - 1.0) / 2.0;
    let y_mean = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (t, v) in y.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - y_mean);
        sxx += dt * dt;
    }
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (y_mean - b * t_mean, b)
}

/// Whether the autocorrelation at lag `m` is significant at the 90% level.
fn seasonal_test(y: &[f64], m: usize) -> bool {
    let n = y.len();
    if m <= 1 || n < 2 * m || y.iter().any(|&v| v <= 0.0) {
        return false;
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let denom: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if denom == 0.0 {
        return false;
    }
    let num: f64 = (m..n).map(|t| (y[t] - mean) * (y[t - m] - mean)).sum();
    (num / denom).abs() > 1.645 / (n as f64).sqrt()
}

/// Classical multiplicative decomposition: ratio of the data to a centred
/// moving average, averaged by position and normalised to mean 1.
fn seasonal_indices(y: &[f64], m: usize) -> Vec<f64> {
    let n = y.len();
    let half = m / 2;
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    for t in half..n.saturating_sub(half) {
        let cma = if m % 2 == 1 {
            y[t - half..=t + half].iter().sum::<f64>() / m as f64
        } else {
            if t + half >= n {
                continue;
            }
            (0.5 * y[t - half] + y[t - half + 1..t + half].iter().sum::<f64>() + 0.5 * y[t + half]) / m as f64
        };
        sums[t % m] += y[t] / cma;
        counts[t % m] += 1;
    }
    if counts.contains(&0) {
        return Vec::new();
    }
    let raw: Vec<f64> = sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect();
    let norm = raw.iter().sum::<f64>() / m as f64;
    raw.iter().map(|v| v / norm).collect()
}

impl ThetaFit {
    pub fn forecast(&self, h: usize, levels: &QuantileLevels) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut mean = Vec::with_capacity(h);
        for j in 1..=h {
            let t = (self.n - 1 + j) as f64;
            let line = self.intercept + self.drift * t;
            let smooth = self.level + self.drift * j as f64;
            mean.push(0.5 * line + 0.5 * smooth);
        }
        let var: Vec<f64> = (1..=h).map(|j| j as f64).collect();
        let mut q = gaussian_quantiles(&mean, self.sigma, &var, levels);
        if !self.seasonal.is_empty() {
            let m = self.seasonal.len();
            for (k, v) in mean.iter_mut().enumerate() {
                *v *= self.seasonal[k % m];
            }
            for path in q.iter_mut() {
                for (k, v) in path.iter_mut().enumerate() {
                    *v *= self.seasonal[k % m];
                }
            }
        }
        (mean, q)
    }
}
