//! End-to-end training and prediction under a time limit.

mod artifact;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use artifact::{ArtifactError, CovariateSchema, LeaderboardRow, PredictorArtifact, FORMAT_VERSION};

use crate::backtest::{evaluate_candidates, guarded, BacktestError, Candidate, Forecaster, ModelStatus, ValidationReport};
use crate::deadline::Deadline;
use crate::ensemble::{combine, forward_select, EnsembleError, EnsembleWeights, MemberForecasts};
use crate::forecast::{ForecastFrame, QuantileLevels};
use crate::metrics::EvalMetric;
use crate::models::global::{GlobalSpec, Strategy};
use crate::models::local::LocalModelSpec;
use crate::models::{FitContext, ModelError, ModelSpec, TrainedMember};
use crate::panel::{split_last, Frequency, PanelError, TimeSeriesFrame};

/// Name of the ensemble row on the leaderboard.
pub const ENSEMBLE_NAME: &str = "WeightedEnsemble";
/// Share of the time limit kept back for ensemble selection.
const ENSEMBLE_RESERVE: f64 = 0.05;
const SELECTION_STEPS: usize = 100;

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error("invalid task: {0}")]
    InvalidTask(String),
    #[error("data frequency {found} does not match the trained frequency {expected}")]
    FrequencyMismatch { expected: Frequency, found: Frequency },
    #[error("all models failed: {0}")]
    AllModelsFailed(String),
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
}

impl From<BacktestError> for PredictorError {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Panel(p) => PredictorError::Panel(p),
            e @ BacktestError::AllModelsFailed(_) => PredictorError::AllModelsFailed(e.to_string()),
            e => PredictorError::InvalidTask(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Fast,
    #[default]
    Medium,
    Best,
}

impl Preset {
    /// Candidate models in the order they are evaluated.
    pub fn candidates(self, seed: u64) -> Vec<Candidate> {
        let global = |strategy| {
            let mut spec = GlobalSpec::new(strategy);
            spec.learner.seed = seed;
            ModelSpec::Global(spec)
        };
        let mut c = vec![
            Candidate::new("SeasonalNaive", ModelSpec::Local(LocalModelSpec::seasonal_naive())),
            Candidate::new("Naive", ModelSpec::Local(LocalModelSpec::Naive)),
            Candidate::new("Theta", ModelSpec::Local(LocalModelSpec::theta())),
        ];
        match self {
            Preset::Fast => {}
            Preset::Medium => {
                c.push(Candidate::new("ETS", ModelSpec::Local(LocalModelSpec::ets())));
                c.push(Candidate::new("GlobalLinearRecursive", global(Strategy::Recursive)));
            }
            Preset::Best => {
                c.push(Candidate::new("ETS", ModelSpec::Local(LocalModelSpec::ets_damped())));
                c.push(Candidate::new("GlobalLinearRecursive", global(Strategy::Recursive)));
                c.push(Candidate::new("GlobalLinearDirect", global(Strategy::Direct)));
            }
        }
        c
    }
}

impl FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(Preset::Fast),
            "medium" => Ok(Preset::Medium),
            "best" => Ok(Preset::Best),
            _ => Err(format!("unknown preset `{s}` (expected fast, medium or best)")),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Fast => "fast",
            Preset::Medium => "medium",
            Preset::Best => "best",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskConfig {
    pub prediction_length: usize,
    pub quantile_levels: QuantileLevels,
    pub eval_metric: EvalMetric,
    pub time_limit_seconds: f64,
    pub preset: Preset,
    #[serde(default)]
    pub known_covariate_names: Vec<String>,
    pub num_windows: usize,
    pub seed: u64,
}

impl TaskConfig {
    pub fn new(prediction_length: usize) -> Self {
        TaskConfig {
            prediction_length,
            quantile_levels: QuantileLevels::default(),
            eval_metric: EvalMetric::Wql,
            time_limit_seconds: 600.0,
            preset: Preset::default(),
            known_covariate_names: Vec::new(),
            num_windows: 1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PredictorError> {
        if self.prediction_length == 0 {
            return Err(PredictorError::InvalidTask("prediction length must be at least 1".into()));
        }
        if !(self.time_limit_seconds > 0.0 && self.time_limit_seconds.is_finite()) {
            return Err(PredictorError::InvalidTask("time limit must be a positive number of seconds".into()));
        }
        if self.num_windows == 0 {
            return Err(PredictorError::InvalidTask("number of windows must be at least 1".into()));
        }
        Ok(())
    }

    fn context(&self, deadline: Deadline) -> FitContext {
        FitContext { horizon: self.prediction_length, levels: self.quantile_levels.clone(), deadline }
    }
}

/// Train the preset's candidates and build an ensemble.
pub fn fit(task: &TaskConfig, train: &TimeSeriesFrame) -> Result<PredictorArtifact, PredictorError> {
    let candidates = task.preset.candidates(task.seed);
    let refs: Vec<&dyn Forecaster> = candidates.iter().map(|c| c as &dyn Forecaster).collect();
    fit_with_candidates(task, train, &refs)
}

/// [`fit`] with an explicit candidate list. Members are persisted through
/// the [`TrainedMember`] they return.
pub fn fit_with_candidates(
    task: &TaskConfig,
    train: &TimeSeriesFrame,
    candidates: &[&dyn Forecaster],
) -> Result<PredictorArtifact, PredictorError> {
    task.validate()?;
    split_last(train, task.prediction_length)?;
    let train = restrict_known(train, &task.known_covariate_names)?;
    let started = Instant::now();
    let limit = Duration::from_secs_f64(task.time_limit_seconds);
    let nw = task.num_windows as f64;
    let validation_budget = limit.mul_f64((1.0 - ENSEMBLE_RESERVE) * nw / (nw + 1.0));
    let season = train.seasonality().get();

    let report = evaluate_candidates(candidates, &train, task, Some(validation_budget))?;

    let t = Instant::now();
    let ok = report.ok_models();
    let mut weights = select(&report, &ok, task.eval_metric, season)?;
    let mut ensemble_seconds = t.elapsed().as_secs_f64();

    let refit_deadline = Deadline::at(started + limit.mul_f64(1.0 - ENSEMBLE_RESERVE));
    let mut members: IndexMap<String, TrainedMember> = IndexMap::new();
    let mut refit_failed: Vec<String> = Vec::new();
    let mut refit_seconds: IndexMap<String, f64> = IndexMap::new();
    loop {
        for (name, _) in weights.support() {
            if members.contains_key(name) || refit_failed.iter().any(|n| n == name) {
                continue;
            }
            let cand = candidates.iter().find(|c| c.name() == name).expect("weights name a candidate");
            let deadline = if members.is_empty() { Deadline::none() } else { refit_deadline };
            let t = Instant::now();
            match guarded(|| cand.fit(&train, &task.context(deadline))) {
                Ok(m) => {
                    members.insert(name.to_string(), m);
                }
                Err(e) => {
                    log::warn!("refit of {name} failed: {e}");
                    refit_failed.push(name.to_string());
                }
            }
            refit_seconds.insert(name.to_string(), t.elapsed().as_secs_f64());
        }
        if weights.support().all(|(n, _)| members.contains_key(n)) {
            break;
        }
        let remaining: Vec<usize> = ok.iter().copied().filter(|&i| !refit_failed.contains(&report.models[i].name)).collect();
        if remaining.is_empty() {
            return Err(PredictorError::AllModelsFailed("every selected model failed to refit".into()));
        }
        let t = Instant::now();
        weights = select(&report, &remaining, task.eval_metric, season)?;
        ensemble_seconds += t.elapsed().as_secs_f64();
    }
    members.retain(|name, _| weights.get(name) > 0.0);
    let members: IndexMap<String, TrainedMember> =
        weights.support().map(|(n, _)| (n.to_string(), members.swap_remove(n).expect("refit member"))).collect();

    let leaderboard = artifact::leaderboard(&report, &weights, ensemble_seconds, &refit_seconds);
    let (past, known, statics) = train.covariate_names();
    Ok(PredictorArtifact {
        format_version: FORMAT_VERSION,
        task: task.clone(),
        frequency: train.frequency(),
        seasonality: season,
        schema: CovariateSchema { past, known, statics },
        weights,
        leaderboard,
        members,
    })
}

fn select(report: &ValidationReport, models: &[usize], metric: EvalMetric, season: usize) -> Result<EnsembleWeights, PredictorError> {
    let members: Vec<MemberForecasts<'_>> =
        models.iter().map(|&i| MemberForecasts { name: &report.models[i].name, windows: &report.oof[i] }).collect();
    Ok(forward_select(&members, &report.windows, metric, season, SELECTION_STEPS)?)
}

/// Keep only the named known covariates when a list is given.
fn restrict_known(frame: &TimeSeriesFrame, names: &[String]) -> Result<TimeSeriesFrame, PredictorError> {
    if names.is_empty() {
        return Ok(frame.clone());
    }
    let mut series = frame.series().clone();
    for (id, s) in series.iter_mut() {
        for n in names {
            if !s.known_covariates.contains_key(n) {
                return Err(PanelError::MissingCovariate { id: id.clone(), name: n.clone() }.into());
            }
        }
        s.known_covariates.retain(|k, _| names.contains(k));
    }
    Ok(TimeSeriesFrame::new(frame.frequency(), series)?)
}

impl PredictorArtifact {
    /// Forecast `prediction_length` steps for every series of `frame`.
    /// `known_future` supplies future known covariates when they are not
    /// already appended to `frame`.
    pub fn predict(&self, frame: &TimeSeriesFrame, known_future: Option<&TimeSeriesFrame>) -> Result<ForecastFrame, PredictorError> {
        if frame.frequency() != self.frequency {
            return Err(PredictorError::FrequencyMismatch { expected: self.frequency, found: frame.frequency() });
        }
        let frame = match known_future {
            Some(f) => frame.with_future_known(f)?,
            None => frame.clone(),
        };
        let ctx = self.task.context(Deadline::none());
        let mut forecasts = IndexMap::new();
        for (name, member) in &self.members {
            forecasts.insert(name.clone(), member.forecast(&frame, &ctx)?);
        }
        Ok(combine(&self.weights, &forecasts)?)
    }

    /// Hold out the last `prediction_length` steps, forecast them from the
    /// rest and score with `metric` (the task metric by default).
    pub fn evaluate(&self, frame: &TimeSeriesFrame, metric: Option<EvalMetric>) -> Result<f64, PredictorError> {
        let (history, holdout) = split_last(frame, self.task.prediction_length)?;
        let forecast = self.predict(&history, None)?;
        let metric = metric.unwrap_or(self.task.eval_metric);
        metric
            .score(&forecast, &holdout, &history, self.seasonality)
            .map_err(|e| PredictorError::InvalidTask(e.to_string()))
    }

    pub fn leaderboard(&self) -> &[LeaderboardRow] {
        &self.leaderboard
    }

    /// Status of a candidate by name.
    pub fn status(&self, name: &str) -> Option<&ModelStatus> {
        self.leaderboard.iter().find(|r| r.model == name).map(|r| &r.status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_contents() {
        let names = |p: Preset| p.candidates(0).into_iter().map(|c| c.name).collect::<Vec<_>>();
        assert_eq!(names(Preset::Fast), vec!["SeasonalNaive", "Naive", "Theta"]);
        assert_eq!(names(Preset::Medium), vec!["SeasonalNaive", "Naive", "Theta", "ETS", "GlobalLinearRecursive"]);
        assert_eq!(
            names(Preset::Best),
            vec!["SeasonalNaive", "Naive", "Theta", "ETS", "GlobalLinearRecursive", "GlobalLinearDirect"]
        );
    }

    #[test]
    fn task_validation() {
        assert!(TaskConfig::new(0).validate().is_err());
        let mut t = TaskConfig::new(3);
        t.time_limit_seconds = 0.0;
        assert!(t.validate().is_err());
        assert!(TaskConfig::new(3).validate().is_ok());
        assert_eq!("BEST".parse::<Preset>(), Ok(Preset::Best));
    }
}
