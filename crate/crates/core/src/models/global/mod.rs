//! Global models: one linear quantile regressor shared by every series.

pub mod features;
pub mod learner;

use serde::{Deserialize, Serialize};

pub use features::{build_features, Calendar, FeatureMatrix, FeatureRow, FeatureSchema, StaticEncoding, Strategy};
pub use learner::{LearnerConfig, LinearHead, QuantileRegressor};

use super::{FitContext, ModelError};
use crate::forecast::{ForecastFrame, QuantileLevels, SeriesForecast};
use crate::panel::{Frequency, TimeSeriesFrame};
use features::series_scale;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSpec {
    pub strategy: Strategy,
    /// Lags to use; `None` picks [`default_lags`] from the seasonality.
    #[serde(default)]
    pub lags: Option<Vec<usize>>,
    /// Divide each series by its mean absolute value before building rows.
    #[serde(default = "yes")]
    pub scaling: bool,
    #[serde(default)]
    pub learner: LearnerConfig,
}

fn yes() -> bool {
    true
}

impl GlobalSpec {
    pub fn new(strategy: Strategy) -> Self {
        GlobalSpec { strategy, lags: None, scaling: true, learner: LearnerConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedGlobalModel {
    pub spec: GlobalSpec,
    pub frequency: Frequency,
    pub horizon: usize,
    pub levels: QuantileLevels,
    pub schema: FeatureSchema,
    /// One regressor for recursive models, one per step for direct models.
    pub regressors: Vec<QuantileRegressor>,
}

/// `{1, ..., min(12, 2s)} ∪ {s, 2s}`, sorted.
pub fn default_lags(season: usize) -> Vec<usize> {
    let s = season.max(1);
    let mut lags: Vec<usize> = (1..=12.min(2 * s)).collect();
    lags.push(s);
    lags.push(2 * s);
    lags.sort_unstable();
    lags.dedup();
    lags
}

/// Default lags restricted to those that fit series of length `min_len`.
fn fitting_lags(season: usize, min_len: usize) -> Vec<usize> {
    let lags: Vec<usize> = default_lags(season).into_iter().filter(|&l| l < min_len).collect();
    if lags.is_empty() {
        vec![1]
    } else {
        lags
    }
}

pub fn fit_global(spec: &GlobalSpec, train: &TimeSeriesFrame, ctx: &FitContext) -> Result<TrainedGlobalModel, ModelError> {
    let lags = match &spec.lags {
        Some(l) => l.clone(),
        None => fitting_lags(train.seasonality().get(), train.min_length()),
    };
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let usable: Vec<&str> = train.iter().filter(|(_, s)| s.len() > max_lag).map(|(id, _)| id.as_str()).collect();
    if usable.is_empty() {
        let id = train.ids().next().unwrap_or_default().to_string();
        return Err(ModelError::LagExceedsLength(id));
    }
    let subset = if usable.len() == train.len() { train.clone() } else { train.select(usable) };
    ctx.checkpoint()?;
    let matrix = build_features(&subset, &lags, ctx.horizon, spec.strategy, spec.scaling)?;

    let steps = match spec.strategy {
        Strategy::Recursive => 1,
        Strategy::Direct => ctx.horizon,
    };
    let mut regressors = Vec::with_capacity(steps);
    for step in 1..=steps {
        ctx.checkpoint()?;
        let (x, y) = matrix.step_data(step);
        if x.is_empty() {
            return Err(ModelError::InvalidSpec(format!("no training rows for horizon step {step}")));
        }
        if x[0].is_empty() || (0..x[0].len()).all(|j| x.iter().all(|r| r[j] == x[0][j])) {
            return Err(ModelError::DegenerateFeatures);
        }
        let cfg = LearnerConfig { seed: spec.learner.seed.wrapping_add(step as u64 - 1), ..spec.learner.clone() };
        regressors.push(QuantileRegressor::fit(&x, &y, ctx.levels.as_slice(), &cfg, &ctx.deadline)?);
    }
    Ok(TrainedGlobalModel {
        spec: GlobalSpec { lags: Some(lags), ..spec.clone() },
        frequency: train.frequency(),
        horizon: ctx.horizon,
        levels: ctx.levels.clone(),
        schema: matrix.schema,
        regressors,
    })
}

/// Forecast every series of `frame`, which need not have been seen at fit
/// time. Known covariates must extend `h` steps past the end of the target.
pub fn predict_global(
    model: &TrainedGlobalModel,
    frame: &TimeSeriesFrame,
    h: usize,
    levels: &QuantileLevels,
) -> Result<ForecastFrame, ModelError> {
    if levels != &model.levels {
        return Err(ModelError::LevelMismatch);
    }
    if h == 0 {
        return Err(ModelError::InvalidSpec("horizon must be positive".into()));
    }
    if model.spec.strategy == Strategy::Direct && h > model.regressors.len() {
        return Err(ModelError::HorizonMismatch { trained: model.regressors.len(), requested: h });
    }
    let freq = frame.frequency();
    let max_lag = model.schema.max_lag();
    let mut out = ForecastFrame::new(freq, levels.clone());
    for (id, s) in frame.iter() {
        if s.len() < max_lag {
            return Err(ModelError::SeriesTooShortForLags(id.clone()));
        }
        for name in &model.schema.known {
            if s.known_covariates.get(name).map_or(true, |v| v.len() < s.len() + h) {
                return Err(ModelError::MissingKnownCovariates(id.clone()));
            }
        }
        let scale = series_scale(&s.target, model.spec.scaling);
        let mut history: Vec<f64> = s.target.iter().map(|v| v / scale).collect();
        let last = s.len() - 1;
        let mut mean = Vec::with_capacity(h);
        let mut quantiles = vec![Vec::with_capacity(h); levels.len()];
        for k in 1..=h {
            let (anchor, step, reg) = match model.spec.strategy {
                Strategy::Recursive => (last + k - 1, 1, &model.regressors[0]),
                Strategy::Direct => (last, k, &model.regressors[k - 1]),
            };
            let row = model.schema.row(id, freq, s, &history, anchor, step)?;
            let (m, qs) = reg.predict(&row);
            if model.spec.strategy == Strategy::Recursive {
                history.push(m);
            }
            mean.push(m * scale);
            for (path, q) in quantiles.iter_mut().zip(qs) {
                path.push(q * scale);
            }
        }
        let mut f = SeriesForecast { start: frame.next_timestamp(s), mean, quantiles };
        f.sort_quantiles();
        out.series.insert(id.clone(), f);
    }
    Ok(out)
}
