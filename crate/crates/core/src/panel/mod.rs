//! Panel data: collections of univariate series sharing a frequency.

mod csv_io;
mod frequency;
mod split;
mod tsf;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_csv, read_csv, write_csv, ColumnMap, LoadOptions};
pub(crate) use csv_io::format_timestamp;
pub use frequency::{infer_frequency, Frequency, Seasonality};
pub use split::{slice_windows, split_last, Window};
pub use tsf::{load_tsf, read_tsf, TsfDataset};

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("row {row}: cannot parse timestamp `{value}`")]
    UnparseableTimestamp { row: usize, value: String },
    #[error("row {row}: cannot parse `{value}` in column `{column}`")]
    InvalidValue { row: usize, column: String, value: String },
    #[error("series `{id}` has a duplicate timestamp {timestamp}")]
    DuplicateTimestamp { id: String, timestamp: NaiveDateTime },
    #[error("series `{0}` is not regularly spaced at the panel frequency")]
    IrregularSpacing(String),
    #[error("series `{id}` has a missing target value at {timestamp}")]
    MissingValue { id: String, timestamp: NaiveDateTime },
    #[error("series `{id}`: covariate `{name}` is missing values")]
    MissingCovariate { id: String, name: String },
    #[error("no data rows")]
    EmptyData,
    #[error("series `{0}` is empty")]
    EmptySeries(String),
    #[error("cannot infer frequency: spacing matches none of Y, Q, M, W, D, H")]
    AmbiguousFrequency,
    #[error("series `{0}` has a single observation and no frequency was supplied")]
    SingletonSeries(String),
    #[error("unknown frequency `{0}`")]
    UnknownFrequency(String),
    #[error("series too short for horizon {horizon}: {}", ids.join(", "))]
    SeriesTooShort { horizon: usize, ids: Vec<String> },
    #[error("no validation window retains any series")]
    NoValidWindows,
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("series `{id}`: covariate `{name}` has length {found}, expected {expected}")]
    CovariateLength { id: String, name: String, found: usize, expected: usize },
    #[error("series `{id}`: static covariate `{name}` varies across rows")]
    InconsistentStatic { id: String, name: String },
    #[error("series `{0}`: target contains non-finite values")]
    NonFinite(String),
    #[error("line {line}: {message}")]
    Tsf { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// A static (time-invariant) covariate value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StaticValue {
    Real(f64),
    Category(String),
}

/// One univariate series with aligned covariates.
///
/// `known_covariates` may extend past the end of `target` (up to the forecast
/// horizon) because their future values are known in advance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub start: NaiveDateTime,
    pub target: Vec<f64>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub past_covariates: IndexMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub known_covariates: IndexMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub static_covariates: IndexMap<String, StaticValue>,
}

impl TimeSeries {
    pub fn new(start: NaiveDateTime, target: Vec<f64>) -> Self {
        TimeSeries {
            start,
            target,
            past_covariates: IndexMap::new(),
            known_covariates: IndexMap::new(),
            static_covariates: IndexMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn last(&self) -> f64 {
        *self.target.last().expect("series is non-empty")
    }

    /// Copy of steps `[from, to)` of target and past covariates. Known
    /// covariates are cut at `known_to` (clamped to what is available).
    pub(crate) fn slice(&self, freq: Frequency, from: usize, to: usize, known_to: usize) -> TimeSeries {
        TimeSeries {
            start: freq.advance(self.start, from as i64),
            target: self.target[from..to].to_vec(),
            past_covariates: self
                .past_covariates
                .iter()
                .map(|(k, v)| (k.clone(), v[from..to].to_vec()))
                .collect(),
            known_covariates: self
                .known_covariates
                .iter()
                .map(|(k, v)| (k.clone(), v[from..known_to.min(v.len())].to_vec()))
                .collect(),
            static_covariates: self.static_covariates.clone(),
        }
    }
}

/// An immutable panel of series sharing one frequency. Series keep insertion
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesFrame {
    frequency: Frequency,
    series: IndexMap<String, TimeSeries>,
}

impl TimeSeriesFrame {
    pub fn new(frequency: Frequency, series: IndexMap<String, TimeSeries>) -> Result<Self, PanelError> {
        for (id, s) in &series {
            if s.target.is_empty() {
                return Err(PanelError::EmptySeries(id.clone()));
            }
            if s.target.iter().any(|v| !v.is_finite()) {
                return Err(PanelError::NonFinite(id.clone()));
            }
            for (name, v) in &s.past_covariates {
                if v.len() != s.len() {
                    return Err(PanelError::CovariateLength {
                        id: id.clone(),
                        name: name.clone(),
                        found: v.len(),
                        expected: s.len(),
                    });
                }
            }
            for (name, v) in &s.known_covariates {
                if v.len() < s.len() {
                    return Err(PanelError::CovariateLength {
                        id: id.clone(),
                        name: name.clone(),
                        found: v.len(),
                        expected: s.len(),
                    });
                }
            }
        }
        Ok(TimeSeriesFrame { frequency, series })
    }

    /// Build a frame of plain target series, all starting at `start`.
    pub fn from_targets<I, S>(frequency: Frequency, start: NaiveDateTime, targets: I) -> Result<Self, PanelError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let series = targets
            .into_iter()
            .map(|(id, t)| (id.into(), TimeSeries::new(start, t)))
            .collect();
        TimeSeriesFrame::new(frequency, series)
    }

    pub fn frequency(&self) -> Frequency {
        self.frequency
    }

    pub fn seasonality(&self) -> Seasonality {
        self.frequency.seasonality()
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&TimeSeries> {
        self.series.get(id)
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&String, &TimeSeries)> {
        self.series.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }

    pub fn series(&self) -> &IndexMap<String, TimeSeries> {
        &self.series
    }

    pub fn into_series(self) -> IndexMap<String, TimeSeries> {
        self.series
    }

    pub fn timestamps(&self, id: &str) -> Option<Vec<NaiveDateTime>> {
        let s = self.series.get(id)?;
        Some((0..s.len()).map(|k| self.frequency.advance(s.start, k as i64)).collect())
    }

    /// Timestamp of the first step after the end of series `s`.
    pub fn next_timestamp(&self, s: &TimeSeries) -> NaiveDateTime {
        self.frequency.advance(s.start, s.len() as i64)
    }

    pub fn min_length(&self) -> usize {
        self.series.values().map(TimeSeries::len).min().unwrap_or(0)
    }

    pub fn total_observations(&self) -> usize {
        self.series.values().map(TimeSeries::len).sum()
    }

    /// Names of past / known covariates and static covariates, taken from the
    /// first series.
    pub fn covariate_names(&self) -> (Vec<String>, Vec<String>, Vec<String>) {
        match self.series.values().next() {
            Some(s) => (
                s.past_covariates.keys().cloned().collect(),
                s.known_covariates.keys().cloned().collect(),
                s.static_covariates.keys().cloned().collect(),
            ),
            None => Default::default(),
        }
    }

    /// Copy of the frame keeping only the listed series.
    pub fn select<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> TimeSeriesFrame {
        let series = ids
            .into_iter()
            .filter_map(|id| self.series.get(id).map(|s| (id.to_string(), s.clone())))
            .collect();
        TimeSeriesFrame { frequency: self.frequency, series }
    }

    /// Copy of the frame with every covariate removed.
    pub fn without_covariates(&self) -> TimeSeriesFrame {
        let series = self
            .series
            .iter()
            .map(|(id, s)| (id.clone(), TimeSeries::new(s.start, s.target.clone())))
            .collect();
        TimeSeriesFrame { frequency: self.frequency, series }
    }

    /// Extend known covariates of every series with future values taken from
    /// `future`, a frame whose series start right after the history ends.
    /// Target values of `future` are ignored.
    pub fn with_future_known(&self, future: &TimeSeriesFrame) -> Result<TimeSeriesFrame, PanelError> {
        let mut series = self.series.clone();
        for (id, s) in series.iter_mut() {
            let Some(f) = future.get(id) else {
                continue;
            };
            let next = self.frequency.advance(s.start, s.len() as i64);
            let offset = if f.start == next {
                0
            } else if f.start == s.start {
                // the future file may repeat the history
                s.len()
            } else {
                return Err(PanelError::IrregularSpacing(id.clone()));
            };
            for (name, values) in &f.known_covariates {
                if values.len() < offset {
                    continue;
                }
                let base = s.known_covariates.entry(name.clone()).or_default();
                base.truncate(s.target.len());
                if base.len() < s.target.len() {
                    return Err(PanelError::MissingCovariate { id: id.clone(), name: name.clone() });
                }
                base.extend_from_slice(&values[offset..]);
            }
        }
        TimeSeriesFrame::new(self.frequency, series)
    }
}
