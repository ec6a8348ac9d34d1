//! Forecasting models.
//!
//! [`local`] models are fit independently to every series and must be refit
//! to forecast series they have not seen. [`global`] models are fit once on
//! the whole panel through a tabular regression and can forecast any series
//! with enough history.

pub mod global;
pub mod local;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::deadline::Deadline;
use crate::forecast::{ForecastFrame, QuantileLevels};
use crate::panel::{PanelError, TimeSeriesFrame};

pub use global::{fit_global, predict_global, GlobalSpec, TrainedGlobalModel};
pub use local::{fit_local, predict_local, LocalModelSpec, TrainedLocalModel};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("series `{0}` is too short to fit")]
    SeriesTooShort(String),
    #[error("model has not been fitted")]
    NotFitted,
    #[error("series `{0}` is not longer than the largest lag")]
    LagExceedsLength(String),
    #[error("series `{0}` is shorter than the largest lag")]
    SeriesTooShortForLags(String),
    #[error("series `{0}` lacks known covariates for the forecast horizon")]
    MissingKnownCovariates(String),
    #[error("all feature columns have zero variance")]
    DegenerateFeatures,
    #[error("training loss became non-finite")]
    NonFiniteLoss,
    #[error("requested quantile levels differ from the trained ones")]
    LevelMismatch,
    #[error("requested horizon {requested} exceeds trained horizon {trained}")]
    HorizonMismatch { trained: usize, requested: usize },
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("time budget exhausted")]
    Timeout,
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error("{0}")]
    Other(String),
}

/// Inputs shared by every fit: horizon, quantile levels and the time limit.
#[derive(Debug, Clone)]
pub struct FitContext {
    pub horizon: usize,
    pub levels: QuantileLevels,
    pub deadline: Deadline,
}

impl FitContext {
    pub fn new(horizon: usize, levels: QuantileLevels) -> Self {
        FitContext { horizon, levels, deadline: Deadline::none() }
    }

    pub fn with_deadline(mut self, deadline: Deadline) -> Self {
        self.deadline = deadline;
        self
    }

    pub(crate) fn checkpoint(&self) -> Result<(), ModelError> {
        if self.deadline.expired() {
            Err(ModelError::Timeout)
        } else {
            Ok(())
        }
    }
}

/// A serializable model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "config")]
pub enum ModelSpec {
    Local(LocalModelSpec),
    Global(GlobalSpec),
}

impl ModelSpec {
    pub fn fit(&self, train: &TimeSeriesFrame, ctx: &FitContext) -> Result<TrainedMember, ModelError> {
        match self {
            ModelSpec::Local(spec) => fit_local(spec, train, &ctx.deadline).map(TrainedMember::Local),
            ModelSpec::Global(spec) => fit_global(spec, train, ctx).map(TrainedMember::Global),
        }
    }
}

/// A fitted model of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "state")]
pub enum TrainedMember {
    Local(TrainedLocalModel),
    Global(TrainedGlobalModel),
}

impl TrainedMember {
    /// Forecast the series the member was fitted on.
    pub fn forecast_fitted(&self, train: &TimeSeriesFrame, ctx: &FitContext) -> Result<ForecastFrame, ModelError> {
        match self {
            TrainedMember::Local(m) => predict_local(m, ctx.horizon, &ctx.levels),
            TrainedMember::Global(m) => predict_global(m, train, ctx.horizon, &ctx.levels),
        }
    }

    /// Forecast arbitrary series. Local members are refit on `frame` first.
    pub fn forecast(&self, frame: &TimeSeriesFrame, ctx: &FitContext) -> Result<ForecastFrame, ModelError> {
        match self {
            TrainedMember::Local(m) => {
                let refit = fit_local(&m.spec, frame, &ctx.deadline)?;
                predict_local(&refit, ctx.horizon, &ctx.levels)
            }
            TrainedMember::Global(m) => predict_global(m, frame, ctx.horizon, &ctx.levels),
        }
    }
}

/// Standard normal quantile, exactly antisymmetric around 0.5.
pub(crate) fn normal_quantile(q: f64) -> f64 {
    if q == 0.5 {
        return 0.0;
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    if q < 0.5 {
        -n.inverse_cdf(1.0 - q)
    } else {
        n.inverse_cdf(q)
    }
}

/// Gaussian quantile paths `mean + z_q * sigma * sqrt(variance)` for every
/// level, indexed `[level][step]`.
pub(crate) fn gaussian_quantiles(mean: &[f64], sigma: f64, variance: &[f64], levels: &QuantileLevels) -> Vec<Vec<f64>> {
    levels
        .iter()
        .map(|q| {
            let z = normal_quantile(q);
            mean.iter().zip(variance).map(|(m, v)| m + z * sigma * v.sqrt()).collect()
        })
        .collect()
}
