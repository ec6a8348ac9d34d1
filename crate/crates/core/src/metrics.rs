//! Forecast accuracy metrics.
//!
//! Both metrics are lower-is-better:
//!
//! - MASE scores the point forecast against the in-sample seasonal naive
//!   error of each series, then averages over series.
//! - wQL is the pinball loss at one quantile level, summed over the whole
//!   panel and normalised by the summed absolute actuals; the mean over the
//!   configured levels is the reported score.

use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{ForecastFrame, QuantileLevels};
use crate::panel::TimeSeriesFrame;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("every series has a zero seasonal-difference scale")]
    AllDenominatorsZero,
    #[error("actual values sum to zero in absolute value")]
    ZeroDenominator,
    #[error("no forecast for quantile level {0}")]
    MissingLevel(f64),
    #[error("no forecast for series `{0}`")]
    MissingSeries(String),
    #[error("need at least two finite scores")]
    FewerThanTwoScores,
    #[error("unknown metric `{0}` (expected MASE or WQL)")]
    UnknownMetric(String),
    #[error("nothing to score")]
    Empty,
}

/// Evaluation metric of a forecasting task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvalMetric {
    #[serde(rename = "MASE")]
    Mase,
    #[serde(rename = "WQL")]
    Wql,
}

impl FromStr for EvalMetric {
    type Err = MetricError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MASE" => Ok(EvalMetric::Mase),
            "WQL" | "MEAN_WQL" | "MEAN_WQUANTILELOSS" => Ok(EvalMetric::Wql),
            other => Err(MetricError::UnknownMetric(other.to_string())),
        }
    }
}

impl fmt::Display for EvalMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalMetric::Mase => "MASE",
            EvalMetric::Wql => "WQL",
        })
    }
}

impl EvalMetric {
    /// Score `forecast` against `actual`, with `history` supplying the
    /// in-sample data for MASE scaling. Series are taken in `actual` order.
    pub fn score(
        self,
        forecast: &ForecastFrame,
        actual: &TimeSeriesFrame,
        history: &TimeSeriesFrame,
        season: usize,
    ) -> Result<f64, MetricError> {
        let missing = |id: &str| MetricError::MissingSeries(id.to_string());
        let actuals: Vec<&[f64]> = actual.iter().map(|(_, s)| s.target.as_slice()).collect();
        match self {
            EvalMetric::Mase => {
                let mut points = Vec::with_capacity(actual.len());
                let mut hist = Vec::with_capacity(actual.len());
                for (id, _) in actual.iter() {
                    points.push(forecast.point(id).ok_or_else(|| missing(id))?);
                    hist.push(history.get(id).ok_or_else(|| missing(id))?.target.as_slice());
                }
                mase(&actuals, &points, &hist, season)
            }
            EvalMetric::Wql => {
                let mut per_level = Vec::with_capacity(forecast.levels.len());
                for (l, q) in forecast.levels.iter().enumerate() {
                    let mut paths = Vec::with_capacity(actual.len());
                    for (id, _) in actual.iter() {
                        paths.push(forecast.get(id).ok_or_else(|| missing(id))?.quantiles[l].as_slice());
                    }
                    per_level.push((q, paths));
                }
                mean_wql(&forecast.levels, &actuals, &per_level)
            }
        }
    }
}

/// Mean absolute seasonal difference of a history; `None` when the history
/// is not longer than the season.
pub fn seasonal_error(history: &[f64], season: usize) -> Option<f64> {
    if history.len() <= season {
        return None;
    }
    let n = history.len() - season;
    let total: f64 = (0..n).map(|t| (history[t + season] - history[t]).abs()).sum();
    Some(total / n as f64)
}

/// Mean absolute scaled error averaged over series.
///
/// Series whose seasonal-difference scale is zero (or undefined because the
/// history is too short) are left out with a warning.
pub fn mase<A, F, H>(actual: &[A], forecast: &[F], history: &[H], season: usize) -> Result<f64, MetricError>
where
    A: AsRef<[f64]>,
    F: AsRef<[f64]>,
    H: AsRef<[f64]>,
{
    if actual.len() != forecast.len() || actual.len() != history.len() {
        return Err(MetricError::LengthMismatch(format!(
            "{} actual, {} forecast, {} history series",
            actual.len(),
            forecast.len(),
            history.len()
        )));
    }
    if actual.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut total = 0.0;
    let mut used = 0usize;
    for (i, ((y, f), hist)) in actual.iter().zip(forecast).zip(history).enumerate() {
        let (y, f) = (y.as_ref(), f.as_ref());
        if y.len() != f.len() || y.is_empty() {
            return Err(MetricError::LengthMismatch(format!("series {i}: {} actual vs {} forecast", y.len(), f.len())));
        }
        let scale = match seasonal_error(hist.as_ref(), season) {
            Some(s) if s > 0.0 => s,
            _ => {
                warn!("series {i} excluded from MASE: zero or undefined seasonal scale");
                continue;
            }
        };
        let mae = y.iter().zip(f).map(|(a, b)| (a - b).abs()).sum::<f64>() / y.len() as f64;
        total += mae / scale;
        used += 1;
    }
    if used == 0 {
        return Err(MetricError::AllDenominatorsZero);
    }
    Ok(total / used as f64)
}

/// Pinball loss of forecast `f` for actual `y` at level `q`.
pub fn pinball(q: f64, y: f64, f: f64) -> f64 {
    q * (y - f).max(0.0) + (1.0 - q) * (f - y).max(0.0)
}

/// Weighted quantile loss at a single level, pooled over the whole panel.
pub fn wql_at<A, F>(q: f64, actual: &[A], forecast: &[F]) -> Result<f64, MetricError>
where
    A: AsRef<[f64]>,
    F: AsRef<[f64]>,
{
    if actual.len() != forecast.len() {
        return Err(MetricError::LengthMismatch(format!("{} actual vs {} forecast series", actual.len(), forecast.len())));
    }
    let mut loss = 0.0;
    let mut scale = 0.0;
    for (i, (y, f)) in actual.iter().zip(forecast).enumerate() {
        let (y, f) = (y.as_ref(), f.as_ref());
        if y.len() != f.len() {
            return Err(MetricError::LengthMismatch(format!("series {i}: {} actual vs {} forecast", y.len(), f.len())));
        }
        for (a, b) in y.iter().zip(f) {
            loss += pinball(q, *a, *b);
            scale += a.abs();
        }
    }
    if scale == 0.0 {
        return Err(MetricError::ZeroDenominator);
    }
    Ok(2.0 * loss / scale)
}

/// Mean of [`wql_at`] over `levels`. `forecasts` pairs each level with its
/// per-series forecast paths.
pub fn mean_wql<A, F>(levels: &QuantileLevels, actual: &[A], forecasts: &[(f64, Vec<F>)]) -> Result<f64, MetricError>
where
    A: AsRef<[f64]>,
    F: AsRef<[f64]>,
{
    let mut total = 0.0;
    for q in levels.iter() {
        let (_, paths) = forecasts.iter().find(|(l, _)| *l == q).ok_or(MetricError::MissingLevel(q))?;
        total += wql_at(q, actual, paths)?;
    }
    Ok(total / levels.len() as f64)
}

/// Min-max rescale one dataset's per-method errors into [0, 1].
///
/// Non-finite scores are ignored for the range and come back as NaN. When all
/// finite scores are equal they all map to 0.
pub fn rescale_errors(scores: &[f64]) -> Result<Vec<f64>, MetricError> {
    let finite: Vec<f64> = scores.iter().copied().filter(|s| s.is_finite()).collect();
    if finite.len() < 2 {
        return Err(MetricError::FewerThanTwoScores);
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    Ok(scores
        .iter()
        .map(|&s| match s.is_finite() {
            false => f64::NAN,
            true if range == 0.0 => 0.0,
            true => (s - lo) / range,
        })
        .collect())
}
