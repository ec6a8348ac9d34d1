//! Validation windows, out-of-fold forecasts and per-model budgets.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deadline::Deadline;
use crate::forecast::ForecastFrame;
use crate::metrics::EvalMetric;
use crate::models::{FitContext, ModelError, ModelSpec, TrainedMember};
use crate::panel::{slice_windows, PanelError, TimeSeriesFrame, Window};
use crate::predictor::TaskConfig;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("no candidate models were given")]
    NoCandidates,
    #[error("all models failed: {}", .0.iter().map(|(m, r)| format!("{m}: {r}")).collect::<Vec<_>>().join("; "))]
    AllModelsFailed(Vec<(String, String)>),
    #[error(transparent)]
    Panel(#[from] PanelError),
}

/// Anything that can be trained on a panel.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;
    fn fit(&self, train: &TimeSeriesFrame, ctx: &FitContext) -> Result<TrainedMember, ModelError>;
}

/// A named [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub name: String,
    pub spec: ModelSpec,
}

impl Candidate {
    pub fn new(name: impl Into<String>, spec: ModelSpec) -> Self {
        Candidate { name: name.into(), spec }
    }
}

impl Forecaster for Candidate {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&self, train: &TimeSeriesFrame, ctx: &FitContext) -> Result<TrainedMember, ModelError> {
        self.spec.fit(train, ctx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum ModelStatus {
    Ok,
    Failed(String),
    Skipped(String),
}

impl ModelStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, ModelStatus::Ok)
    }

    pub fn label(&self) -> &'static str {
        match self {
            ModelStatus::Ok => "ok",
            ModelStatus::Failed(_) => "failed",
            ModelStatus::Skipped(_) => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub name: String,
    pub status: ModelStatus,
    /// Mean of the window scores; `None` unless the status is ok.
    pub score: Option<f64>,
    pub window_scores: Vec<f64>,
    pub fit_seconds: f64,
    pub predict_seconds: f64,
}

/// Per-model validation results plus the out-of-fold forecasts needed by
/// the ensemble. Forecasts and windows are not serialized.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub models: Vec<ModelReport>,
    #[serde(skip)]
    pub oof: Vec<Vec<ForecastFrame>>,
    #[serde(skip)]
    pub windows: Vec<Window>,
}

impl ValidationReport {
    /// Indices of models with status ok.
    pub fn ok_models(&self) -> Vec<usize> {
        (0..self.models.len()).filter(|&i| self.models[i].status.is_ok()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.name == name)
    }
}

/// Even split of what is left over the models still to run.
pub fn allocate_budget(remaining: Duration, remaining_models: usize) -> Duration {
    if remaining_models == 0 {
        return remaining;
    }
    remaining / remaining_models as u32
}

/// Backtest every candidate in order on the trailing windows of `frame`.
///
/// With a `budget`, each candidate after the first gets
/// [`allocate_budget`] of what is left; one that runs out is marked skipped.
/// Errors and panics mark a candidate failed without affecting the others.
pub fn evaluate_candidates(
    candidates: &[&dyn Forecaster],
    frame: &TimeSeriesFrame,
    task: &TaskConfig,
    budget: Option<Duration>,
) -> Result<ValidationReport, BacktestError> {
    if candidates.is_empty() {
        return Err(BacktestError::NoCandidates);
    }
    let windows = slice_windows(frame, task.prediction_length, task.num_windows)?;
    let season = frame.seasonality().get();
    let started = Instant::now();
    let mut report = ValidationReport { windows, ..Default::default() };

    for (i, cand) in candidates.iter().enumerate() {
        let deadline = match budget {
            Some(total) if i > 0 => {
                let cap = allocate_budget(total.saturating_sub(started.elapsed()), candidates.len() - i);
                if cap.is_zero() {
                    log::info!("skipping {}: time budget exhausted", cand.name());
                    report.models.push(ModelReport {
                        name: cand.name().to_string(),
                        status: ModelStatus::Skipped("time budget exhausted".into()),
                        score: None,
                        window_scores: Vec::new(),
                        fit_seconds: 0.0,
                        predict_seconds: 0.0,
                    });
                    report.oof.push(Vec::new());
                    continue;
                }
                Deadline::after(cap)
            }
            _ => Deadline::none(),
        };
        let ctx = FitContext { horizon: task.prediction_length, levels: task.quantile_levels.clone(), deadline };
        let (entry, oof) = run_candidate(*cand, &report.windows, &ctx, task.eval_metric, season);
        log::info!("{}: {} score={:?}", entry.name, entry.status.label(), entry.score);
        report.models.push(entry);
        report.oof.push(oof);
    }

    if report.ok_models().is_empty() {
        let reasons = report
            .models
            .iter()
            .map(|m| {
                let why = match &m.status {
                    ModelStatus::Failed(r) | ModelStatus::Skipped(r) => r.clone(),
                    ModelStatus::Ok => String::new(),
                };
                (m.name.clone(), why)
            })
            .collect();
        return Err(BacktestError::AllModelsFailed(reasons));
    }
    Ok(report)
}

fn run_candidate(
    cand: &dyn Forecaster,
    windows: &[Window],
    ctx: &FitContext,
    metric: EvalMetric,
    season: usize,
) -> (ModelReport, Vec<ForecastFrame>) {
    let mut entry = ModelReport {
        name: cand.name().to_string(),
        status: ModelStatus::Ok,
        score: None,
        window_scores: Vec::with_capacity(windows.len()),
        fit_seconds: 0.0,
        predict_seconds: 0.0,
    };
    let mut oof = Vec::with_capacity(windows.len());
    for w in windows {
        let t = Instant::now();
        let fitted = guarded(|| cand.fit(&w.train, ctx));
        entry.fit_seconds += t.elapsed().as_secs_f64();
        let t = Instant::now();
        let forecast = fitted.and_then(|m| guarded(|| m.forecast_fitted(&w.train, ctx)));
        entry.predict_seconds += t.elapsed().as_secs_f64();
        let forecast = match forecast {
            Ok(f) => f,
            Err(e) => {
                entry.status = status_for(&e);
                return (entry, Vec::new());
            }
        };
        match metric.score(&forecast, &w.validation, &w.train, season) {
            Ok(s) if s.is_finite() => entry.window_scores.push(s),
            Ok(s) => {
                entry.status = ModelStatus::Failed(format!("non-finite validation score {s}"));
                return (entry, Vec::new());
            }
            Err(e) => {
                entry.status = ModelStatus::Failed(e.to_string());
                return (entry, Vec::new());
            }
        }
        oof.push(forecast);
    }
    entry.score = Some(window_mean(&entry.window_scores));
    (entry, oof)
}

pub(crate) fn window_mean(scores: &[f64]) -> f64 {
    scores.iter().sum::<f64>() / scores.len() as f64
}

fn status_for(e: &ModelError) -> ModelStatus {
    match e {
        ModelError::Timeout => ModelStatus::Skipped("time budget exhausted".into()),
        e => ModelStatus::Failed(e.to_string()),
    }
}

/// Run `f`, turning a panic into [`ModelError::Other`].
pub(crate) fn guarded<T>(f: impl FnOnce() -> Result<T, ModelError>) -> Result<T, ModelError> {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(r) => r,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            Err(ModelError::Other(format!("panicked: {msg}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_division() {
        assert_eq!(allocate_budget(Duration::from_secs(100), 4), Duration::from_secs(25));
        assert_eq!(allocate_budget(Duration::ZERO, 3), Duration::ZERO);
    }

    #[test]
    fn budget_recurrence_grows_when_models_finish_early() {
        // 60 s over 3 models, each finishing in 5 s
        let mut remaining = 60.0;
        let mut caps = Vec::new();
        for left in (1..=3).rev() {
            caps.push(allocate_budget(Duration::from_secs_f64(remaining), left).as_secs_f64());
            remaining -= 5.0;
        }
        assert_eq!(caps, vec![20.0, 27.5, 50.0]);
    }

    #[test]
    fn panics_are_contained() {
        let r: Result<(), ModelError> = guarded(|| panic!("boom"));
        assert!(matches!(r, Err(ModelError::Other(m)) if m.contains("boom")));
    }
}
