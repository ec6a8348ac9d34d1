//! Per-series statistical models.

pub mod ets;
pub mod theta;

use chrono::NaiveDateTime;
use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{gaussian_quantiles, ModelError};
use crate::deadline::Deadline;
use crate::forecast::{ForecastFrame, QuantileLevels, SeriesForecast};
use crate::panel::{Frequency, TimeSeriesFrame};

pub use ets::{EtsComponents, EtsFit, EtsParams, Trend};
pub use theta::ThetaFit;

/// Configuration of a local model. `season` overrides the frame seasonality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LocalModelSpec {
    Naive,
    SeasonalNaive {
        #[serde(default)]
        season: Option<usize>,
    },
    Ets {
        /// Candidate structures, selected per series by AICc.
        grid: Vec<EtsComponents>,
        #[serde(default)]
        season: Option<usize>,
        /// Skip optimisation and use these smoothing parameters.
        #[serde(default)]
        fixed: Option<EtsParams>,
    },
    Theta {
        #[serde(default)]
        season: Option<usize>,
    },
}

impl LocalModelSpec {
    pub fn seasonal_naive() -> Self {
        LocalModelSpec::SeasonalNaive { season: None }
    }

    /// ETS over {ANN, AAN, ANA, AAA}.
    pub fn ets() -> Self {
        LocalModelSpec::Ets { grid: EtsComponents::default_grid(), season: None, fixed: None }
    }

    /// ETS whose grid also contains damped-trend candidates.
    pub fn ets_damped() -> Self {
        LocalModelSpec::Ets { grid: EtsComponents::extended_grid(), season: None, fixed: None }
    }

    pub fn theta() -> Self {
        LocalModelSpec::Theta { season: None }
    }

    fn season_override(&self) -> Option<usize> {
        match self {
            LocalModelSpec::Naive => Some(1),
            LocalModelSpec::SeasonalNaive { season } | LocalModelSpec::Ets { season, .. } | LocalModelSpec::Theta { season } => {
                *season
            }
        }
    }
}

/// Fitted state of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LocalParams {
    Naive { last: f64, sigma: f64 },
    /// `last_season[k % len]` is the forecast for step `k`.
    SeasonalNaive { last_season: Vec<f64>, sigma: f64 },
    Ets(EtsFit),
    Theta(ThetaFit),
}

impl LocalParams {
    /// Mean path and quantiles `[level][step]`.
    pub fn forecast(&self, h: usize, levels: &QuantileLevels) -> (Vec<f64>, Vec<Vec<f64>>) {
        match self {
            LocalParams::Naive { last, sigma } => {
                let mean = vec![*last; h];
                let var: Vec<f64> = (1..=h).map(|k| k as f64).collect();
                let q = gaussian_quantiles(&mean, *sigma, &var, levels);
                (mean, q)
            }
            LocalParams::SeasonalNaive { last_season, sigma } => {
                let m = last_season.len();
                let mean: Vec<f64> = (0..h).map(|k| last_season[k % m]).collect();
                let var: Vec<f64> = (0..h).map(|k| (k / m + 1) as f64).collect();
                let q = gaussian_quantiles(&mean, *sigma, &var, levels);
                (mean, q)
            }
            LocalParams::Ets(fit) => fit.forecast(h, levels),
            LocalParams::Theta(fit) => fit.forecast(h, levels),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSeriesFit {
    /// Timestamp of the first forecast step.
    pub start: NaiveDateTime,
    pub params: LocalParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedLocalModel {
    pub spec: LocalModelSpec,
    pub frequency: Frequency,
    pub season: usize,
    pub series: IndexMap<String, LocalSeriesFit>,
}

/// Fit `spec` to every series of `train` in parallel.
pub fn fit_local(spec: &LocalModelSpec, train: &TimeSeriesFrame, deadline: &Deadline) -> Result<TrainedLocalModel, ModelError> {
    let season = spec.season_override().unwrap_or_else(|| train.seasonality().get()).max(1);
    let items: Vec<(&String, &crate::panel::TimeSeries)> = train.iter().collect();
    let fits = items
        .par_iter()
        .map(|(id, s)| {
            if deadline.expired() {
                return Err(ModelError::Timeout);
            }
            let params = fit_series(spec, &s.target, season).map_err(|e| match e {
                ModelError::SeriesTooShort(_) => ModelError::SeriesTooShort((*id).clone()),
                e => e,
            })?;
            Ok(((*id).clone(), LocalSeriesFit { start: train.next_timestamp(s), params }))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TrainedLocalModel { spec: spec.clone(), frequency: train.frequency(), season, series: fits.into_iter().collect() })
}

/// Fit one series. Every local model needs at least two observations.
pub fn fit_series(spec: &LocalModelSpec, y: &[f64], season: usize) -> Result<LocalParams, ModelError> {
    if y.len() < 2 {
        return Err(ModelError::SeriesTooShort(String::new()));
    }
    Ok(match spec {
        LocalModelSpec::Naive => naive(y),
        LocalModelSpec::SeasonalNaive { .. } => {
            if season <= 1 || y.len() <= season {
                match naive(y) {
                    LocalParams::Naive { last, sigma } => LocalParams::SeasonalNaive { last_season: vec![last], sigma },
                    _ => unreachable!(),
                }
            } else {
                LocalParams::SeasonalNaive { last_season: y[y.len() - season..].to_vec(), sigma: lagged_sigma(y, season) }
            }
        }
        LocalModelSpec::Ets { grid, fixed, .. } => {
            if grid.is_empty() {
                return Err(ModelError::InvalidSpec("empty ETS grid".into()));
            }
            LocalParams::Ets(ets::fit(y, season, grid, fixed.as_ref()))
        }
        LocalModelSpec::Theta { .. } => LocalParams::Theta(theta::fit(y, season)),
    })
}

fn naive(y: &[f64]) -> LocalParams {
    LocalParams::Naive { last: y[y.len() - 1], sigma: lagged_sigma(y, 1) }
}

/// Root mean square of `y[t] - y[t - lag]`.
fn lagged_sigma(y: &[f64], lag: usize) -> f64 {
    let mut sse = 0.0;
    let mut n = 0usize;
    for t in lag..y.len() {
        let e = y[t] - y[t - lag];
        sse += e * e;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        (sse / n as f64).sqrt()
    }
}

/// Forecast `h` steps for every fitted series.
pub fn predict_local(model: &TrainedLocalModel, h: usize, levels: &QuantileLevels) -> Result<ForecastFrame, ModelError> {
    if h == 0 {
        return Err(ModelError::InvalidSpec("horizon must be positive".into()));
    }
    let mut out = ForecastFrame::new(model.frequency, levels.clone());
    for (id, fit) in &model.series {
        let (mean, quantiles) = fit.params.forecast(h, levels);
        let mut f = SeriesForecast { start: fit.start, mean, quantiles };
        f.sort_quantiles();
        out.series.insert(id.clone(), f);
    }
    Ok(out)
}
