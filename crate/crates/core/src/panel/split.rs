use indexmap::IndexMap;

use super::{PanelError, TimeSeriesFrame};

/// One backtest window: fit on `train`, score on `validation`.
///
/// Known covariates of `train` extend over the validation span.
#[derive(Debug, Clone)]
pub struct Window {
    /// 1 is the most recent window.
    pub index: usize,
    pub train: TimeSeriesFrame,
    pub validation: TimeSeriesFrame,
}

/// Hold out the last `h` steps of every series.
pub fn split_last(frame: &TimeSeriesFrame, h: usize) -> Result<(TimeSeriesFrame, TimeSeriesFrame), PanelError> {
    if h == 0 {
        return Err(PanelError::InvalidHorizon);
    }
    let short: Vec<String> = frame.iter().filter(|(_, s)| s.len() <= h).map(|(id, _)| id.clone()).collect();
    if !short.is_empty() {
        return Err(PanelError::SeriesTooShort { horizon: h, ids: short });
    }
    let window = cut(frame, h, 1);
    Ok((window.0, window.1))
}

/// Trailing backtest windows. Window `k` trains on the first `T - k*h` steps
/// and validates on the following `h`. Series too short for a window are left
/// out of that window only; windows left with no series are dropped.
pub fn slice_windows(frame: &TimeSeriesFrame, h: usize, num_windows: usize) -> Result<Vec<Window>, PanelError> {
    if h == 0 {
        return Err(PanelError::InvalidHorizon);
    }
    let mut windows = Vec::with_capacity(num_windows);
    for k in 1..=num_windows {
        let (train, validation) = cut(frame, h, k);
        if !train.is_empty() {
            windows.push(Window { index: k, train, validation });
        }
    }
    if windows.is_empty() {
        return Err(PanelError::NoValidWindows);
    }
    Ok(windows)
}

fn cut(frame: &TimeSeriesFrame, h: usize, k: usize) -> (TimeSeriesFrame, TimeSeriesFrame) {
    let freq = frame.frequency();
    let mut train = IndexMap::new();
    let mut validation = IndexMap::new();
    for (id, s) in frame.iter() {
        let Some(end) = s.len().checked_sub(k * h).filter(|&e| e >= 1) else {
            continue;
        };
        train.insert(id.clone(), s.slice(freq, 0, end, end + h));
        validation.insert(id.clone(), s.slice(freq, end, end + h, end + h));
    }
    (
        TimeSeriesFrame::new(freq, train).expect("slices of a valid frame"),
        TimeSeriesFrame::new(freq, validation).expect("slices of a valid frame"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::{Frequency, TimeSeries};
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn frame(lengths: &[usize]) -> TimeSeriesFrame {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        TimeSeriesFrame::from_targets(
            Frequency::Daily,
            start,
            lengths.iter().enumerate().map(|(i, &n)| (format!("s{i}"), (0..n).map(|v| v as f64).collect())),
        )
        .unwrap()
    }

    #[test]
    fn split_lengths() {
        let (a, b) = split_last(&frame(&[10]), 3).unwrap();
        assert_eq!(a.get("s0").unwrap().len(), 7);
        assert_eq!(b.get("s0").unwrap().len(), 3);
        assert_eq!(b.get("s0").unwrap().target, vec![7.0, 8.0, 9.0]);
        assert_eq!(b.get("s0").unwrap().start, Frequency::Daily.advance(a.get("s0").unwrap().start, 7));
    }

    #[test]
    fn split_rejects_h_equal_to_length() {
        match split_last(&frame(&[10, 3]), 3) {
            Err(PanelError::SeriesTooShort { ids, .. }) => assert_eq!(ids, vec!["s1".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn split_two_series() {
        // hand slicing: 30 - 8 = 22, 48 - 8 = 40
        let (a, _) = split_last(&frame(&[30, 48]), 8).unwrap();
        assert_eq!(a.iter().map(|(_, s)| s.len()).collect::<Vec<_>>(), vec![22, 40]);
    }

    #[test]
    fn windows_step_back_by_horizon() {
        let w = slice_windows(&frame(&[30]), 5, 2).unwrap();
        assert_eq!(w.iter().map(|w| w.train.get("s0").unwrap().len()).collect::<Vec<_>>(), vec![25, 20]);
        assert_eq!(w[1].validation.get("s0").unwrap().target, vec![20.0, 21.0, 22.0, 23.0, 24.0]);
    }

    #[test]
    fn short_series_drop_out_of_older_windows() {
        // 12 - 10 = 2 >= 1 but 12 - 20 < 1; 40 - 20 = 20
        let w = slice_windows(&frame(&[12, 40]), 10, 2).unwrap();
        assert_eq!(w[0].train.len(), 2);
        assert_eq!(w[1].train.ids().collect::<Vec<_>>(), vec!["s1"]);
    }

    #[test]
    fn no_valid_windows() {
        assert!(matches!(slice_windows(&frame(&[3]), 5, 2), Err(PanelError::NoValidWindows)));
    }

    #[test]
    fn known_covariates_cover_validation_span() {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        let mut s = TimeSeries::new(start, vec![1.0; 10]);
        s.known_covariates.insert("k".into(), (0..10).map(f64::from).collect());
        s.past_covariates.insert("p".into(), (0..10).map(f64::from).collect());
        let f = TimeSeriesFrame::new(Frequency::Daily, [("a".to_string(), s)].into_iter().collect()).unwrap();
        let w = slice_windows(&f, 3, 2).unwrap();
        let train = w[1].train.get("a").unwrap();
        assert_eq!(train.len(), 4);
        assert_eq!(train.past_covariates["p"].len(), 4);
        assert_eq!(train.known_covariates["k"], vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    proptest! {
        #[test]
        fn split_concatenation_reproduces_input(lengths in prop::collection::vec(2usize..60, 1..6), h in 1usize..20) {
            let f = frame(&lengths);
            match split_last(&f, h) {
                Ok((a, b)) => {
                    for (id, s) in f.iter() {
                        let mut joined = a.get(id).unwrap().target.clone();
                        joined.extend_from_slice(&b.get(id).unwrap().target);
                        prop_assert_eq!(&joined, &s.target);
                    }
                    let w = slice_windows(&f, h, 1).unwrap();
                    prop_assert_eq!(&w[0].train, &a);
                    prop_assert_eq!(&w[0].validation, &b);
                }
                Err(PanelError::SeriesTooShort { .. }) => prop_assert!(lengths.iter().any(|&n| n <= h)),
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
