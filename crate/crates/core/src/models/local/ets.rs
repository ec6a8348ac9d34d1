//! Additive-error exponential smoothing in error-correction form with AICc
//! model selection over a small grid of structures.

use serde::{Deserialize, Serialize};

use crate::forecast::QuantileLevels;
use crate::models::gaussian_quantiles;

const LO: f64 = 1e-4;
const HI: f64 = 0.9999;
const PHI_LO: f64 = 0.8;
const PHI_HI: f64 = 0.98;
const SWEEPS: usize = 3;
const GOLDEN_ITERS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    None,
    Additive,
    Damped,
}

/// Model structure: trend kind and whether an additive season is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EtsComponents {
    pub trend: Trend,
    pub seasonal: bool,
}

impl EtsComponents {
    pub const ANN: EtsComponents = EtsComponents { trend: Trend::None, seasonal: false };
    pub const AAN: EtsComponents = EtsComponents { trend: Trend::Additive, seasonal: false };
    pub const ANA: EtsComponents = EtsComponents { trend: Trend::None, seasonal: true };
    pub const AAA: EtsComponents = EtsComponents { trend: Trend::Additive, seasonal: true };
    pub const AADN: EtsComponents = EtsComponents { trend: Trend::Damped, seasonal: false };
    pub const AADA: EtsComponents = EtsComponents { trend: Trend::Damped, seasonal: true };

    pub fn default_grid() -> Vec<EtsComponents> {
        vec![Self::ANN, Self::AAN, Self::ANA, Self::AAA]
    }

    pub fn extended_grid() -> Vec<EtsComponents> {
        vec![Self::ANN, Self::AAN, Self::ANA, Self::AAA, Self::AADN, Self::AADA]
    }

    pub fn label(&self) -> String {
        let t = match self.trend {
            Trend::None => "N",
            Trend::Additive => "A",
            Trend::Damped => "Ad",
        };
        format!("A{t}{}", if self.seasonal { "A" } else { "N" })
    }

    fn has_trend(&self) -> bool {
        self.trend != Trend::None
    }

    /// Observations consumed by state initialisation.
    fn warmup(&self, m: usize) -> usize {
        if self.seasonal {
            m
        } else if self.has_trend() {
            2
        } else {
            1
        }
    }

    /// Smoothing parameters plus free initial states.
    fn num_params(&self, m: usize) -> usize {
        let mut k = 2;
        if self.has_trend() {
            k += 2;
        }
        if self.trend == Trend::Damped {
            k += 1;
        }
        if self.seasonal {
            k += m;
        }
        k
    }

    fn usable(&self, n: usize, m: usize) -> bool {
        if self.seasonal {
            m > 1 && n >= 2 * m
        } else {
            n > self.warmup(m)
        }
    }

    fn without_season(&self) -> EtsComponents {
        EtsComponents { trend: self.trend, seasonal: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtsParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl Default for EtsParams {
    fn default() -> Self {
        EtsParams { alpha: 0.5, beta: 0.0, gamma: 0.0, phi: 1.0 }
    }
}

/// Final states of a fitted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EtsFit {
    pub components: EtsComponents,
    pub params: EtsParams,
    pub level: f64,
    pub slope: f64,
    /// Seasonal states in forecast order: entry `j` applies to step `j + 1`.
    pub seasonal: Vec<f64>,
    pub sigma: f64,
    pub aicc: Option<f64>,
}

struct Filtered {
    sse: f64,
    n: usize,
    level: f64,
    slope: f64,
    season: Vec<f64>,
}

/// Run the filter from the initial states and accumulate squared one-step
/// errors from index `t0` onwards.
fn filter(y: &[f64], c: EtsComponents, m: usize, p: &EtsParams, t0: usize) -> Filtered {
    let w = c.warmup(m);
    let (mut level, mut slope, mut season) = init_states(y, c, m);
    let phi = if c.trend == Trend::Damped { p.phi } else { 1.0 };
    let (beta, gamma) = (if c.has_trend() { p.beta } else { 0.0 }, if c.seasonal { p.gamma } else { 0.0 });
    let mut sse = 0.0;
    let mut n = 0;
    for (t, &yt) in y.iter().enumerate().skip(w) {
        let s_old = if c.seasonal { season[t % m] } else { 0.0 };
        let damped = level + phi * slope;
        let e = yt - (damped + s_old);
        if t >= t0 {
            sse += e * e;
            n += 1;
        }
        level = p.alpha * (yt - s_old) + (1.0 - p.alpha) * damped;
        slope = phi * slope + beta * e;
        if c.seasonal {
            season[t % m] = s_old + gamma * e;
        }
    }
    Filtered { sse, n, level, slope, season }
}

/// Level, slope and a seasonal ring buffer (`season[t % m]`) describing the
/// series at the end of the warm-up window.
fn init_states(y: &[f64], c: EtsComponents, m: usize) -> (f64, f64, Vec<f64>) {
    if c.seasonal {
        let mean1 = y[..m].iter().sum::<f64>() / m as f64;
        let slope = if c.has_trend() { (y[m..2 * m].iter().sum::<f64>() / m as f64 - mean1) / m as f64 } else { 0.0 };
        let mid = (m as f64 - 1.0) / 2.0;
        let season = (0..m).map(|j| y[j] - (mean1 + slope * (j as f64 - mid))).collect();
        (mean1 + slope * mid, slope, season)
    } else if c.has_trend() {
        (y[1], y[1] - y[0], Vec::new())
    } else {
        (y[0], 0.0, Vec::new())
    }
}

fn aicc(sse: f64, n: usize, k: usize) -> Option<f64> {
    if n <= k + 1 {
        return None;
    }
    let nf = n as f64;
    let kf = k as f64;
    let mse = (sse / nf).max(1e-300);
    Some(nf * mse.ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0))
}

/// Fit one series: optimise every usable candidate and keep the lowest AICc.
/// Ties and candidates without a defined AICc fall back to grid order.
pub fn fit(y: &[f64], m: usize, grid: &[EtsComponents], fixed: Option<&EtsParams>) -> EtsFit {
    let mut candidates: Vec<EtsComponents> = Vec::new();
    for c in grid {
        let c = if c.usable(y.len(), m) { *c } else { c.without_season() };
        if c.usable(y.len(), m) && !candidates.contains(&c) {
            candidates.push(c);
        }
    }
    if candidates.is_empty() {
        candidates.push(EtsComponents::ANN);
    }

    if y.iter().all(|&v| v == y[0]) {
        let c = candidates[0];
        let season_len = if c.seasonal { m } else { 0 };
        return EtsFit {
            components: c,
            params: fixed.copied().unwrap_or_default(),
            level: y[0],
            slope: 0.0,
            seasonal: vec![0.0; season_len],
            sigma: 0.0,
            aicc: None,
        };
    }

    let t0 = candidates.iter().map(|c| c.warmup(m)).max().unwrap_or(1);
    let mut best: Option<(EtsComponents, EtsParams, Option<f64>)> = None;
    for &c in &candidates {
        let params = match fixed {
            Some(p) => *p,
            None => optimise(y, c, m, t0),
        };
        let f = filter(y, c, m, &params, t0);
        let score = aicc(f.sse, f.n, c.num_params(m));
        let better = match (&best, score) {
            (None, _) => true,
            (Some((_, _, Some(b))), Some(s)) => s < *b,
            (Some((_, _, None)), Some(_)) => true,
            _ => false,
        };
        if better {
            best = Some((c, params, score));
        }
    }
    let (c, params, score) = best.expect("at least one candidate");
    let f = filter(y, c, m, &params, c.warmup(m));
    let n = y.len();
    let seasonal = if c.seasonal { (0..m).map(|j| f.season[(n + j) % m]).collect() } else { Vec::new() };
    EtsFit {
        components: c,
        params,
        level: f.level,
        slope: f.slope,
        seasonal,
        sigma: if f.n == 0 { 0.0 } else { (f.sse / f.n as f64).sqrt() },
        aicc: score,
    }
}

fn optimise(y: &[f64], c: EtsComponents, m: usize, t0: usize) -> EtsParams {
    let sse = |p: &EtsParams| {
        let s = filter(y, c, m, p, t0).sse;
        if s.is_finite() {
            s
        } else {
            f64::INFINITY
        }
    };
    let trend = c.has_trend();
    let damped = c.trend == Trend::Damped;

    let mut best = EtsParams { alpha: 0.5, beta: 0.0, gamma: 0.0, phi: 1.0 };
    let mut best_sse = f64::INFINITY;
    let fracs: &[f64] = &[0.05, 0.3];
    for &alpha in &[0.05, 0.2, 0.4, 0.6, 0.8, 0.95] {
        for &bf in if trend { fracs } else { &[0.0] } {
            for &gf in if c.seasonal { fracs } else { &[0.0] } {
                for &phi in if damped { &[0.9, 0.98][..] } else { &[1.0][..] } {
                    let p = EtsParams { alpha, beta: (bf * alpha).max(if trend { LO } else { 0.0 }), gamma: gf * (1.0 - alpha), phi };
                    let p = EtsParams { gamma: if c.seasonal { p.gamma.max(LO) } else { 0.0 }, ..p };
                    let s = sse(&p);
                    if s < best_sse {
                        best_sse = s;
                        best = p;
                    }
                }
            }
        }
    }

    for _ in 0..SWEEPS {
        let lo = if trend { best.beta.max(LO) } else { LO };
        let hi = if c.seasonal { (1.0 - best.gamma).min(HI) } else { HI };
        best.alpha = golden(|a| sse(&EtsParams { alpha: a, ..best }), lo, hi, best.alpha);
        if trend {
            best.beta = golden(|b| sse(&EtsParams { beta: b, ..best }), LO, best.alpha, best.beta);
        }
        if c.seasonal {
            best.gamma = golden(|g| sse(&EtsParams { gamma: g, ..best }), LO, (1.0 - best.alpha).max(LO), best.gamma);
        }
        if damped {
            best.phi = golden(|f| sse(&EtsParams { phi: f, ..best }), PHI_LO, PHI_HI, best.phi);
        }
    }
    best
}

/// Golden-section search on `[lo, hi]`; returns `start` unless a strictly
/// better point is found.
pub(crate) fn golden(f: impl Fn(f64) -> f64, lo: f64, hi: f64, start: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..GOLDEN_ITERS {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        }
    }
    let (x, fx) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let start = start.clamp(lo, hi);
    if fx < f(start) {
        x
    } else {
        start
    }
}

impl EtsFit {
    /// Mean path and Gaussian quantiles with the usual additive-error
    /// variance multipliers.
    pub fn forecast(&self, h: usize, levels: &QuantileLevels) -> (Vec<f64>, Vec<Vec<f64>>) {
        let c = self.components;
        let m = self.seasonal.len();
        let damped = c.trend == Trend::Damped;
        let phi = self.params.phi;
        let beta = if c.has_trend() { self.params.beta } else { 0.0 };
        let gamma = if c.seasonal { self.params.gamma } else { 0.0 };

        let mut mean = Vec::with_capacity(h);
        let mut var = Vec::with_capacity(h);
        let mut phi_sum = 0.0;
        let mut phi_pow = 1.0;
        let mut acc = 1.0;
        for j in 1..=h {
            if damped {
                phi_pow *= phi;
                phi_sum += phi_pow;
            } else {
                phi_sum = j as f64;
            }
            let s = if m > 0 { self.seasonal[(j - 1) % m] } else { 0.0 };
            mean.push(self.level + phi_sum * self.slope + s);
            var.push(acc);
            let seasonal_hit = if m > 0 && j % m == 0 { gamma } else { 0.0 };
            let cj = self.params.alpha + beta * phi_sum + seasonal_hit;
            acc += cj * cj;
        }
        let q = gaussian_quantiles(&mean, self.sigma, &var, levels);
        (mean, q)
    }
}
