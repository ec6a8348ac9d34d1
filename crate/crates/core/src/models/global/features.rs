//! Conversion of a panel into a tabular regression problem.

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use crate::models::ModelError;
use crate::panel::{Frequency, PanelError, StaticValue, TimeSeries, TimeSeriesFrame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    /// One one-step regressor, applied repeatedly on its own predictions.
    Recursive,
    /// One regressor per horizon step.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Calendar {
    None,
    MonthOfYear,
    DayOfWeek,
    HourOfDay,
}

impl Calendar {
    pub fn for_frequency(freq: Frequency) -> Self {
        match freq {
            Frequency::Monthly | Frequency::Quarterly => Calendar::MonthOfYear,
            Frequency::Daily => Calendar::DayOfWeek,
            Frequency::Hourly => Calendar::HourOfDay,
            Frequency::Yearly | Frequency::Weekly => Calendar::None,
        }
    }

    fn width(self) -> usize {
        match self {
            Calendar::None => 0,
            Calendar::MonthOfYear => 12,
            Calendar::DayOfWeek => 7,
            Calendar::HourOfDay => 24,
        }
    }

    fn encode(self, ts: NaiveDateTime, out: &mut Vec<f64>) {
        let hot = match self {
            Calendar::None => return,
            Calendar::MonthOfYear => ts.month0() as usize,
            Calendar::DayOfWeek => ts.weekday().num_days_from_monday() as usize,
            Calendar::HourOfDay => ts.hour() as usize,
        };
        out.extend((0..self.width()).map(|i| if i == hot { 1.0 } else { 0.0 }));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "encoding")]
pub enum StaticEncoding {
    Real { name: String },
    OneHot { name: String, categories: Vec<String> },
}

/// Column layout of a feature row, fixed at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub lags: Vec<usize>,
    pub calendar: Calendar,
    pub known: Vec<String>,
    pub past: Vec<String>,
    pub statics: Vec<StaticEncoding>,
    pub names: Vec<String>,
}

impl FeatureSchema {
    pub fn new(frame: &TimeSeriesFrame, lags: &[usize]) -> Result<Self, ModelError> {
        if lags.is_empty() || lags.contains(&0) {
            return Err(ModelError::InvalidSpec("lags must be non-empty and positive".into()));
        }
        let (past, known, static_names) = frame.covariate_names();
        let calendar = Calendar::for_frequency(frame.frequency());
        let mut statics = Vec::new();
        for name in static_names {
            let values: Vec<&StaticValue> = frame.iter().filter_map(|(_, s)| s.static_covariates.get(&name)).collect();
            if values.iter().all(|v| matches!(v, StaticValue::Real(_))) {
                statics.push(StaticEncoding::Real { name });
            } else {
                let mut categories: Vec<String> = Vec::new();
                for v in values {
                    let c = category(v);
                    if !categories.contains(&c) {
                        categories.push(c);
                    }
                }
                statics.push(StaticEncoding::OneHot { name, categories });
            }
        }

        let mut names: Vec<String> = lags.iter().map(|l| format!("lag_{l}")).collect();
        names.extend((0..calendar.width()).map(|i| format!("calendar_{i}")));
        names.extend(known.iter().map(|k| format!("known_{k}")));
        names.extend(past.iter().map(|k| format!("past_{k}")));
        for s in &statics {
            match s {
                StaticEncoding::Real { name } => names.push(format!("static_{name}")),
                StaticEncoding::OneHot { name, categories } => {
                    names.extend(categories.iter().map(|c| format!("static_{name}={c}")))
                }
            }
        }
        Ok(FeatureSchema { lags: lags.to_vec(), calendar, known, past, statics, names })
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }

    /// Features for predicting the target at `anchor + step` from
    /// information available at `anchor`. `history` holds (scaled) target
    /// values up to at least `anchor`; past covariates beyond the observed
    /// span repeat their last value.
    pub(crate) fn row(
        &self,
        id: &str,
        freq: Frequency,
        series: &TimeSeries,
        history: &[f64],
        anchor: usize,
        step: usize,
    ) -> Result<Vec<f64>, ModelError> {
        let mut out = Vec::with_capacity(self.width());
        for &l in &self.lags {
            out.push(history[anchor + 1 - l]);
        }
        let target = anchor + step;
        self.calendar.encode(freq.advance(series.start, target as i64), &mut out);
        for name in &self.known {
            let v = series
                .known_covariates
                .get(name)
                .and_then(|v| v.get(target))
                .ok_or_else(|| ModelError::MissingKnownCovariates(id.to_string()))?;
            out.push(*v);
        }
        for name in &self.past {
            let values = series
                .past_covariates
                .get(name)
                .filter(|v| !v.is_empty())
                .ok_or_else(|| PanelError::MissingCovariate { id: id.to_string(), name: name.clone() })?;
            out.push(values[anchor.min(values.len() - 1)]);
        }
        for enc in &self.statics {
            match enc {
                StaticEncoding::Real { name } => out.push(match series.static_covariates.get(name) {
                    Some(StaticValue::Real(v)) => *v,
                    _ => 0.0,
                }),
                StaticEncoding::OneHot { name, categories } => {
                    let value = series.static_covariates.get(name).map(category);
                    out.extend(categories.iter().map(|c| if Some(c) == value.as_ref() { 1.0 } else { 0.0 }));
                }
            }
        }
        Ok(out)
    }
}

fn category(v: &StaticValue) -> String {
    match v {
        StaticValue::Real(x) => x.to_string(),
        StaticValue::Category(s) => s.clone(),
    }
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub series: String,
    /// Index of the last observation the features may use.
    pub anchor: usize,
    /// Horizon step: the target sits at `anchor + step`.
    pub step: usize,
    pub features: Vec<f64>,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub schema: FeatureSchema,
    pub rows: Vec<FeatureRow>,
}

impl FeatureMatrix {
    /// Features and targets of the rows with horizon step `step`.
    pub fn step_data(&self, step: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.rows.iter().filter(|r| r.step == step).map(|r| (r.features.clone(), r.target)).unzip()
    }
}

/// Mean absolute target value, or 1 when that is zero.
pub(crate) fn series_scale(y: &[f64], scaling: bool) -> f64 {
    if !scaling || y.is_empty() {
        return 1.0;
    }
    let s = y.iter().map(|v| v.abs()).sum::<f64>() / y.len() as f64;
    if s > 0.0 && s.is_finite() {
        s
    } else {
        1.0
    }
}

/// Tabular rows for every series. Recursive rows pair features at `t` with
/// `y[t+1]`; direct rows pair them with `y[t+k]` for `k` in `1..=h`.
/// Targets and lags are divided by the series scale when `scaling` is set.
pub fn build_features(
    frame: &TimeSeriesFrame,
    lags: &[usize],
    h: usize,
    strategy: Strategy,
    scaling: bool,
) -> Result<FeatureMatrix, ModelError> {
    let schema = FeatureSchema::new(frame, lags)?;
    let max_lag = schema.max_lag();
    if let Some((id, _)) = frame.iter().find(|(_, s)| s.len() <= max_lag) {
        return Err(ModelError::LagExceedsLength(id.clone()));
    }
    let steps = match strategy {
        Strategy::Recursive => 1,
        Strategy::Direct => h.max(1),
    };
    let freq = frame.frequency();
    let mut rows = Vec::new();
    for (id, s) in frame.iter() {
        let scale = series_scale(&s.target, scaling);
        let history: Vec<f64> = s.target.iter().map(|v| v / scale).collect();
        let n = history.len();
        for anchor in max_lag - 1..n - 1 {
            for step in 1..=steps {
                if anchor + step >= n {
                    break;
                }
                let features = schema.row(id, freq, s, &history, anchor, step)?;
                rows.push(FeatureRow { series: id.clone(), anchor, step, features, target: history[anchor + step] });
            }
        }
    }
    Ok(FeatureMatrix { schema, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn frame(freq: Frequency, y: Vec<f64>) -> TimeSeriesFrame {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        TimeSeriesFrame::from_targets(freq, start, [("a".to_string(), y)]).unwrap()
    }

    #[test]
    fn recursive_rows_by_hand() {
        let m = build_features(&frame(Frequency::Yearly, vec![1.0, 2.0, 3.0, 4.0, 5.0]), &[1, 2], 1, Strategy::Recursive, false).unwrap();
        let rows: Vec<(Vec<f64>, f64)> = m.rows.iter().map(|r| (r.features.clone(), r.target)).collect();
        assert_eq!(rows, vec![(vec![2.0, 1.0], 3.0), (vec![3.0, 2.0], 4.0), (vec![4.0, 3.0], 5.0)]);
    }

    #[test]
    fn direct_rows_by_hand() {
        let m = build_features(&frame(Frequency::Yearly, vec![1.0, 2.0, 3.0, 4.0, 5.0]), &[1, 2], 2, Strategy::Direct, false).unwrap();
        let at3: Vec<(usize, f64)> = m.rows.iter().filter(|r| r.features == vec![3.0, 2.0]).map(|r| (r.step, r.target)).collect();
        assert_eq!(at3, vec![(1, 4.0), (2, 5.0)]);
        assert_eq!(m.rows.len(), 5);
    }

    #[test]
    fn lag_longer_than_series() {
        let r = build_features(&frame(Frequency::Yearly, vec![1.0; 5]), &[10], 1, Strategy::Recursive, false);
        assert!(matches!(r, Err(ModelError::LagExceedsLength(id)) if id == "a"));
    }

    #[test]
    fn calendar_one_hot_for_monthly_data() {
        let m = build_features(&frame(Frequency::Monthly, (0..6).map(f64::from).collect()), &[1], 1, Strategy::Recursive, false).unwrap();
        // first row predicts February
        assert_eq!(m.rows[0].features[1..13].iter().position(|&v| v == 1.0), Some(1));
        assert_eq!(m.schema.width(), 13);
    }

    #[test]
    fn static_categories_follow_first_appearance() {
        let start = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut series = indexmap::IndexMap::new();
        for (id, cat) in [("x", "red"), ("y", "blue"), ("z", "red")] {
            let mut s = TimeSeries::new(start, vec![1.0, 2.0, 3.0]);
            s.static_covariates.insert("color".into(), StaticValue::Category(cat.into()));
            series.insert(id.to_string(), s);
        }
        let f = TimeSeriesFrame::new(Frequency::Yearly, series).unwrap();
        let m = build_features(&f, &[1], 1, Strategy::Recursive, false).unwrap();
        assert_eq!(m.schema.names, vec!["lag_1", "static_color=red", "static_color=blue"]);
        assert_eq!(m.rows.iter().find(|r| r.series == "y").unwrap().features, vec![1.0, 0.0, 1.0]);
    }
}
