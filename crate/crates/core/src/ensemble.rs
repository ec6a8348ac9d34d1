//! Greedy forward selection of a weighted ensemble and quantile averaging.

use indexmap::IndexMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::window_mean;
use crate::forecast::{ForecastFrame, SeriesForecast};
use crate::metrics::{EvalMetric, MetricError};
use crate::panel::Window;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no successful models to ensemble")]
    NoSuccessfulModels,
    #[error("no forecast for ensemble member `{0}`")]
    MissingMemberForecast(String),
    #[error("member forecasts do not share the same series, steps and levels")]
    IndexMismatch,
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Convex weights keyed by model name, in candidate order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleWeights {
    pub weights: IndexMap<String, f64>,
    /// Selection steps in the returned bag.
    pub step_count: usize,
    /// Validation score of the returned bag.
    pub score: f64,
}

impl EnsembleWeights {
    /// All weight on one model.
    pub fn single(name: &str, score: f64) -> Self {
        EnsembleWeights { weights: [(name.to_string(), 1.0)].into_iter().collect(), step_count: 1, score }
    }

    pub fn get(&self, name: &str) -> f64 {
        self.weights.get(name).copied().unwrap_or(0.0)
    }

    /// Members with positive weight, in order.
    pub fn support(&self) -> impl Iterator<Item = (&str, f64)> {
        self.weights.iter().filter(|(_, &w)| w > 0.0).map(|(n, &w)| (n.as_str(), w))
    }
}

/// Out-of-fold forecasts of one model, one frame per validation window.
#[derive(Debug, Clone)]
pub struct MemberForecasts<'a> {
    pub name: &'a str,
    pub windows: &'a [ForecastFrame],
}

/// Greedy selection with replacement for `steps` iterations. Each step adds
/// the model whose inclusion gives the lowest window-averaged `metric`; ties
/// go to the earlier model. Returns the weights of the best bag seen.
pub fn forward_select(
    members: &[MemberForecasts<'_>],
    windows: &[Window],
    metric: EvalMetric,
    season: usize,
    steps: usize,
) -> Result<EnsembleWeights, EnsembleError> {
    if members.is_empty() {
        return Err(EnsembleError::NoSuccessfulModels);
    }
    if members.iter().any(|m| m.windows.len() != windows.len()) {
        return Err(EnsembleError::IndexMismatch);
    }
    let score_bag = |counts: &[usize], total: usize| -> Result<f64, EnsembleError> {
        let weights = bag_weights(counts, total);
        let mut scores = Vec::with_capacity(windows.len());
        for (w, window) in windows.iter().enumerate() {
            let parts: Vec<(f64, &ForecastFrame)> =
                members.iter().zip(&weights).filter(|(_, &wt)| wt > 0.0).map(|(m, &wt)| (wt, &m.windows[w])).collect();
            let f = combine_frames(&parts)?;
            scores.push(metric.score(&f, &window.validation, &window.train, season)?);
        }
        Ok(window_mean(&scores))
    };

    let mut counts = vec![0usize; members.len()];
    let mut best: Option<(Vec<usize>, usize, f64)> = None;
    for iter in 1..=steps.max(1) {
        let trials = (0..members.len())
            .into_par_iter()
            .map(|m| {
                let mut c = counts.clone();
                c[m] += 1;
                score_bag(&c, iter)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut pick = 0;
        for (m, s) in trials.iter().enumerate() {
            if *s < trials[pick] || (trials[pick].is_nan() && !s.is_nan()) {
                pick = m;
            }
        }
        counts[pick] += 1;
        let s = trials[pick];
        if best.as_ref().map_or(true, |(_, _, b)| s < *b) {
            best = Some((counts.clone(), iter, s));
        }
    }
    let (counts, total, score) = best.expect("at least one iteration");
    let weights = bag_weights(&counts, total);
    Ok(EnsembleWeights {
        weights: members.iter().zip(weights).map(|(m, w)| (m.name.to_string(), w)).collect(),
        step_count: total,
        score,
    })
}

fn bag_weights(counts: &[usize], total: usize) -> Vec<f64> {
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Weighted average of member forecasts (mean and every quantile).
pub fn combine(weights: &EnsembleWeights, forecasts: &IndexMap<String, ForecastFrame>) -> Result<ForecastFrame, EnsembleError> {
    let parts = weights
        .support()
        .map(|(name, w)| forecasts.get(name).map(|f| (w, f)).ok_or_else(|| EnsembleError::MissingMemberForecast(name.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    combine_frames(&parts)
}

/// `sum_m w_m * f_m` cell by cell, accumulated in member order from zero.
pub(crate) fn combine_frames(parts: &[(f64, &ForecastFrame)]) -> Result<ForecastFrame, EnsembleError> {
    let Some(&(_, first)) = parts.first() else {
        return Err(EnsembleError::NoSuccessfulModels);
    };
    if parts.iter().any(|(_, f)| !f.same_index(first)) {
        return Err(EnsembleError::IndexMismatch);
    }
    let mut out = ForecastFrame::new(first.frequency, first.levels.clone());
    for (id, s) in &first.series {
        let h = s.horizon();
        let mut mean = vec![0.0; h];
        let mut quantiles = vec![vec![0.0; h]; s.quantiles.len()];
        for (w, f) in parts {
            let m = &f.series[id.as_str()];
            for k in 0..h {
                mean[k] += w * m.mean[k];
            }
            for (acc, src) in quantiles.iter_mut().zip(&m.quantiles) {
                for k in 0..h {
                    acc[k] += w * src[k];
                }
            }
        }
        out.series.insert(id.clone(), SeriesForecast { start: s.start, mean, quantiles });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::QuantileLevels;
    use crate::panel::Frequency;
    use chrono::NaiveDateTime;

    fn frame(v: f64) -> ForecastFrame {
        let mut f = ForecastFrame::new(Frequency::Daily, QuantileLevels::new(vec![0.5]).unwrap());
        f.series.insert("a".into(), SeriesForecast { start: NaiveDateTime::default(), mean: vec![v], quantiles: vec![vec![v]] });
        f
    }

    #[test]
    fn identity_and_average() {
        let forecasts: IndexMap<String, ForecastFrame> = [("A".to_string(), frame(10.0)), ("B".to_string(), frame(20.0))].into_iter().collect();
        let one = EnsembleWeights::single("A", 0.0);
        assert_eq!(combine(&one, &forecasts).unwrap(), forecasts["A"]);
        let half = EnsembleWeights { weights: [("A".into(), 0.5), ("B".into(), 0.5)].into_iter().collect(), step_count: 2, score: 0.0 };
        assert_eq!(combine(&half, &forecasts).unwrap().get("a").unwrap().quantiles[0][0], 15.0);
    }

    #[test]
    fn three_member_dot_product() {
        let forecasts: IndexMap<String, ForecastFrame> =
            [("A", 1.0), ("B", 2.0), ("C", 3.0)].into_iter().map(|(n, v)| (n.to_string(), frame(v))).collect();
        let w = EnsembleWeights { weights: [("A".into(), 0.2), ("B".into(), 0.3), ("C".into(), 0.5)].into_iter().collect(), step_count: 10, score: 0.0 };
        let v = combine(&w, &forecasts).unwrap().get("a").unwrap().mean[0];
        assert!((v - 2.3).abs() < 1e-12);
    }

    #[test]
    fn missing_member() {
        let forecasts: IndexMap<String, ForecastFrame> = [("A".to_string(), frame(1.0))].into_iter().collect();
        assert!(matches!(combine(&EnsembleWeights::single("Z", 0.0), &forecasts), Err(EnsembleError::MissingMemberForecast(n)) if n == "Z"));
    }
}
