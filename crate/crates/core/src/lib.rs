//! Probabilistic forecasting AutoML for panels of univariate time series.
//!
//! The crate trains a portfolio of local statistical forecasters (naive,
//! seasonal naive, exponential smoothing, theta) and global tabular
//! forecasters (linear quantile regression on lag features), validates them
//! on held-out trailing windows, and combines them with greedy forward
//! selection into a convex ensemble that emits mean and quantile forecasts.
//!
//! Module map:
//!
//! - [`panel`]: data model, CSV / `.tsf` ingestion, frequency inference,
//!   temporal splits.
//! - [`metrics`]: MASE, weighted quantile loss, leaderboard rescaling.
//! - [`models`]: local and global forecasters.
//! - [`backtest`]: validation windows, time budgeting, failure isolation.
//! - [`ensemble`]: forward selection and Vincentized combination.
//! - [`predictor`]: presets, end-to-end fit, persistence, prediction.
//! - [`cli`]: the command-line front end.

pub mod backtest;
pub mod cli;
pub mod deadline;
pub mod ensemble;
pub mod forecast;
pub mod metrics;
pub mod models;
pub mod panel;
pub mod predictor;

pub use backtest::{evaluate_candidates, Forecaster, ModelStatus, ValidationReport};
pub use ensemble::{combine, forward_select, EnsembleWeights};
pub use forecast::{ForecastFrame, QuantileLevels, SeriesForecast};
pub use metrics::EvalMetric;
pub use panel::{Frequency, Seasonality, TimeSeries, TimeSeriesFrame};
pub use predictor::{Preset, PredictorArtifact, TaskConfig};
