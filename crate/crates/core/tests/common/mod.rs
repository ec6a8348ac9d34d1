#![allow(dead_code)]

use chrono::{NaiveDate, NaiveDateTime};
use panelcast::panel::{Frequency, TimeSeriesFrame};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2000, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

pub fn frame(freq: Frequency, ys: Vec<Vec<f64>>) -> TimeSeriesFrame {
    TimeSeriesFrame::from_targets(freq, start(), ys.into_iter().enumerate().map(|(i, y)| (format!("s{i}"), y))).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// AR(1) around `mu`: `y_t - mu = phi (y_{t-1} - mu) + sigma e_t`.
pub fn ar1(rng: &mut ChaCha8Rng, n: usize, mu: f64, phi: f64, sigma: f64) -> Vec<f64> {
    let mut y = Vec::with_capacity(n);
    let mut prev = mu;
    for _ in 0..n {
        let v = mu + phi * (prev - mu) + sigma * normal(rng);
        y.push(v);
        prev = v;
    }
    y
}

/// Repeating pattern of period `s` plus noise.
pub fn seasonal(rng: &mut ChaCha8Rng, n: usize, s: usize, level: f64, amp: f64, sigma: f64) -> Vec<f64> {
    let phase: f64 = rng.gen::<f64>() * std::f64::consts::TAU;
    (0..n)
        .map(|t| level + amp * ((t % s) as f64 / s as f64 * std::f64::consts::TAU + phase).sin() + sigma * normal(rng))
        .collect()
}

/// Linear trend plus noise.
pub fn trend(rng: &mut ChaCha8Rng, n: usize, level: f64, slope: f64, sigma: f64) -> Vec<f64> {
    (0..n).map(|t| level + slope * t as f64 + sigma * normal(rng)).collect()
}

/// A panel mixing AR(1), seasonal and trend series.
pub fn mixed_panel(seed: u64, n_series: usize, len: usize, freq: Frequency) -> TimeSeriesFrame {
    let mut r = rng(seed);
    let s = freq.seasonality().get().max(2);
    let ys = (0..n_series)
        .map(|i| {
            let level = 50.0 + 50.0 * r.gen::<f64>();
            let (a, b): (f64, f64) = (r.gen(), r.gen());
            match i % 3 {
                0 => ar1(&mut r, len, level, 0.3 + 0.6 * a, 1.0 + 2.0 * b),
                1 => seasonal(&mut r, len, s, level, 5.0 + 10.0 * a, 1.0),
                _ => trend(&mut r, len, level, 0.5 - a, 1.0),
            }
        })
        .collect();
    frame(freq, ys)
}
