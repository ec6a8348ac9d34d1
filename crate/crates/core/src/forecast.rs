//! Forecast containers: quantile levels and per-series forecast paths.

use std::fmt;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::Frequency;

#[derive(Debug, Error, PartialEq)]
pub enum LevelsError {
    #[error("quantile levels must be non-empty")]
    Empty,
    #[error("quantile level {0} is outside (0, 1)")]
    OutOfRange(f64),
    #[error("quantile levels must be strictly increasing")]
    NotIncreasing,
    #[error("cannot parse quantile level `{0}`")]
    Parse(String),
}

/// Strictly increasing quantile levels in (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileLevels(Vec<f64>);

impl QuantileLevels {
    pub fn new(levels: Vec<f64>) -> Result<Self, LevelsError> {
        if levels.is_empty() {
            return Err(LevelsError::Empty);
        }
        if let Some(&bad) = levels.iter().find(|&&q| !(q > 0.0 && q < 1.0)) {
            return Err(LevelsError::OutOfRange(bad));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(LevelsError::NotIncreasing);
        }
        Ok(QuantileLevels(levels))
    }

    /// Parse a comma-separated list such as `0.1,0.5,0.9`.
    pub fn parse_list(s: &str) -> Result<Self, LevelsError> {
        let levels = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| LevelsError::Parse(p.trim().to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        QuantileLevels::new(levels)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.iter().copied()
    }

    pub fn position(&self, q: f64) -> Option<usize> {
        self.0.iter().position(|&l| l == q)
    }

    /// Column label, e.g. `0.1`.
    pub fn label(q: f64) -> String {
        q.to_string()
    }
}

impl Default for QuantileLevels {
    /// 0.1, 0.2, ..., 0.9
    fn default() -> Self {
        QuantileLevels((1..=9).map(|i| i as f64 / 10.0).collect())
    }
}

impl TryFrom<Vec<f64>> for QuantileLevels {
    type Error = LevelsError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        QuantileLevels::new(v)
    }
}

impl From<QuantileLevels> for Vec<f64> {
    fn from(q: QuantileLevels) -> Self {
        q.0
    }
}

impl fmt::Display for QuantileLevels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|q| q.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Forecast for one series: `quantiles[level][step]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesForecast {
    /// Timestamp of the first forecast step.
    pub start: NaiveDateTime,
    pub mean: Vec<f64>,
    pub quantiles: Vec<Vec<f64>>,
}

impl SeriesForecast {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// Sort quantiles non-decreasing at every step.
    pub fn sort_quantiles(&mut self) {
        let levels = self.quantiles.len();
        let mut column = vec![0.0; levels];
        for k in 0..self.mean.len() {
            for (l, c) in column.iter_mut().enumerate() {
                *c = self.quantiles[l][k];
            }
            column.sort_by(f64::total_cmp);
            for (l, c) in column.iter().enumerate() {
                self.quantiles[l][k] = *c;
            }
        }
    }

    pub fn quantiles_monotone(&self) -> bool {
        (0..self.mean.len()).all(|k| self.quantiles.windows(2).all(|w| w[0][k] <= w[1][k]))
    }
}

/// Mean and quantile forecasts for a panel, `H` steps per series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastFrame {
    pub frequency: Frequency,
    pub levels: QuantileLevels,
    pub series: IndexMap<String, SeriesForecast>,
}

impl ForecastFrame {
    pub fn new(frequency: Frequency, levels: QuantileLevels) -> Self {
        ForecastFrame { frequency, levels, series: IndexMap::new() }
    }

    pub fn get(&self, id: &str) -> Option<&SeriesForecast> {
        self.series.get(id)
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Forecast horizon (taken from the first series).
    pub fn horizon(&self) -> usize {
        self.series.values().next().map(SeriesForecast::horizon).unwrap_or(0)
    }

    /// Quantile path at level `q` for a series.
    pub fn quantile(&self, id: &str, q: f64) -> Option<&[f64]> {
        let l = self.levels.position(q)?;
        self.series.get(id).map(|s| s.quantiles[l].as_slice())
    }

    /// The point forecast used for scoring: the median when 0.5 is among the
    /// levels, otherwise the mean.
    pub fn point(&self, id: &str) -> Option<&[f64]> {
        match self.levels.position(0.5) {
            Some(l) => self.series.get(id).map(|s| s.quantiles[l].as_slice()),
            None => self.series.get(id).map(|s| s.mean.as_slice()),
        }
    }

    pub fn quantiles_monotone(&self) -> bool {
        self.series.values().all(SeriesForecast::quantiles_monotone)
    }

    /// Flat rows `(id, timestamp, mean, quantiles)` in series order, steps
    /// ascending.
    pub fn rows(&self) -> impl Iterator<Item = (&str, NaiveDateTime, f64, Vec<f64>)> + '_ {
        self.series.iter().flat_map(move |(id, s)| {
            (0..s.horizon()).map(move |k| {
                (
                    id.as_str(),
                    self.frequency.advance(s.start, k as i64),
                    s.mean[k],
                    s.quantiles.iter().map(|q| q[k]).collect(),
                )
            })
        })
    }

    /// Whether `other` covers the same series, steps, start times and levels.
    pub fn same_index(&self, other: &ForecastFrame) -> bool {
        self.frequency == other.frequency
            && self.levels == other.levels
            && self.series.len() == other.series.len()
            && self
                .series
                .iter()
                .zip(&other.series)
                .all(|((a, sa), (b, sb))| a == b && sa.start == sb.start && sa.horizon() == sb.horizon())
    }
}
