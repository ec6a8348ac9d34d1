use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Duration, Months, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::PanelError;

/// Sampling frequency of a panel, using calendar-offset aliases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Frequency {
    #[serde(rename = "Y")]
    Yearly,
    #[serde(rename = "Q")]
    Quarterly,
    #[serde(rename = "M")]
    Monthly,
    #[serde(rename = "W")]
    Weekly,
    #[serde(rename = "D")]
    Daily,
    #[serde(rename = "H")]
    Hourly,
}

/// Seasonal period implied by a frequency.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seasonality(usize);

impl Seasonality {
    pub fn new(period: usize) -> Self {
        assert!(period >= 1, "seasonal period must be positive");
        Seasonality(period)
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl Frequency {
    pub const ALL: [Frequency; 6] = [
        Frequency::Yearly,
        Frequency::Quarterly,
        Frequency::Monthly,
        Frequency::Weekly,
        Frequency::Daily,
        Frequency::Hourly,
    ];

    pub fn alias(self) -> &'static str {
        match self {
            Frequency::Yearly => "Y",
            Frequency::Quarterly => "Q",
            Frequency::Monthly => "M",
            Frequency::Weekly => "W",
            Frequency::Daily => "D",
            Frequency::Hourly => "H",
        }
    }

    pub fn seasonality(self) -> Seasonality {
        Seasonality(match self {
            Frequency::Yearly => 1,
            Frequency::Quarterly => 4,
            Frequency::Monthly => 12,
            Frequency::Weekly => 1,
            Frequency::Daily => 7,
            Frequency::Hourly => 24,
        })
    }

    fn months_per_step(self) -> Option<u32> {
        match self {
            Frequency::Yearly => Some(12),
            Frequency::Quarterly => Some(3),
            Frequency::Monthly => Some(1),
            _ => None,
        }
    }

    /// Timestamp `steps` periods after `start`.
    ///
    /// Month-based frequencies step on the calendar. A start on the last day
    /// of a month stays anchored to month ends.
    pub fn advance(self, start: NaiveDateTime, steps: i64) -> NaiveDateTime {
        match self.months_per_step() {
            Some(per) => {
                let total = steps * per as i64;
                let date = start.date();
                let month_end = is_month_end(date);
                let shifted = if total >= 0 {
                    date.checked_add_months(Months::new(total as u32))
                } else {
                    date.checked_sub_months(Months::new((-total) as u32))
                }
                .expect("calendar step out of range");
                let shifted = if month_end { last_day_of_month(shifted) } else { shifted };
                shifted.and_time(start.time())
            }
            None => {
                let unit = match self {
                    Frequency::Weekly => Duration::weeks(1),
                    Frequency::Daily => Duration::days(1),
                    _ => Duration::hours(1),
                };
                start + unit * steps as i32
            }
        }
    }

    /// Snap a consecutive-timestamp difference to an alias, if any matches.
    pub fn classify(diff: Duration) -> Option<Frequency> {
        let secs = diff.num_seconds();
        let day = 86_400;
        match secs {
            3_600 => Some(Frequency::Hourly),
            s if s == day => Some(Frequency::Daily),
            s if s == 7 * day => Some(Frequency::Weekly),
            s if (28 * day..=31 * day).contains(&s) && s % day == 0 => Some(Frequency::Monthly),
            s if (89 * day..=92 * day).contains(&s) && s % day == 0 => Some(Frequency::Quarterly),
            s if (365 * day..=366 * day).contains(&s) && s % day == 0 => Some(Frequency::Yearly),
            _ => None,
        }
    }

    /// True when timestamps of this frequency carry no time-of-day.
    pub fn is_date_only(self) -> bool {
        !matches!(self, Frequency::Hourly)
    }
}

fn is_month_end(date: NaiveDate) -> bool {
    date.succ_opt().map(|d| d.month() != date.month()).unwrap_or(true)
}

fn last_day_of_month(date: NaiveDate) -> NaiveDate {
    let (y, m) = if date.month() == 12 { (date.year() + 1, 1) } else { (date.year(), date.month() + 1) };
    NaiveDate::from_ymd_opt(y, m, 1).and_then(|d| d.pred_opt()).expect("valid month")
}

impl fmt::Display for Frequency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.alias())
    }
}

impl FromStr for Frequency {
    type Err = PanelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "Y" | "A" | "YS" | "YE" | "YEARLY" | "ANNUAL" => Ok(Frequency::Yearly),
            "Q" | "QS" | "QE" | "QUARTERLY" => Ok(Frequency::Quarterly),
            "M" | "MS" | "ME" | "MONTHLY" => Ok(Frequency::Monthly),
            "W" | "WEEKLY" => Ok(Frequency::Weekly),
            "D" | "DAILY" => Ok(Frequency::Daily),
            "H" | "HOURLY" => Ok(Frequency::Hourly),
            other => Err(PanelError::UnknownFrequency(other.to_string())),
        }
    }
}

/// Infer the frequency from per-series timestamp groups.
///
/// Every consecutive difference is snapped to an alias; the modal alias wins
/// (ties resolved towards the coarser frequency). Differences matching no
/// alias count as a separate "unmatched" class, and if that class is modal
/// the frequency is ambiguous.
pub fn infer_frequency<S: AsRef<[NaiveDateTime]>>(
    groups: &[(String, S)],
) -> Result<(Frequency, Seasonality), PanelError> {
    let mut counts = [0usize; 6];
    let mut unmatched = 0usize;
    for (id, stamps) in groups {
        let stamps = stamps.as_ref();
        if stamps.len() < 2 {
            return Err(PanelError::SingletonSeries(id.clone()));
        }
        for pair in stamps.windows(2) {
            match Frequency::classify(pair[1] - pair[0]) {
                Some(f) => counts[Frequency::ALL.iter().position(|&a| a == f).unwrap()] += 1,
                None => unmatched += 1,
            }
        }
    }
    let (best, &best_count) = counts
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("six aliases");
    if best_count == 0 || unmatched > best_count {
        return Err(PanelError::AmbiguousFrequency);
    }
    let freq = Frequency::ALL[best];
    Ok((freq, freq.seasonality()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dt(s: &str) -> NaiveDateTime {
        NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S").unwrap()
    }

    fn stamps(start: &str, freq: Frequency, n: i64) -> Vec<NaiveDateTime> {
        (0..n).map(|k| freq.advance(dt(start), k)).collect()
    }

    #[test]
    fn seasonality_table() {
        let expected = [(Frequency::Yearly, 1), (Frequency::Quarterly, 4), (Frequency::Monthly, 12),
            (Frequency::Weekly, 1), (Frequency::Daily, 7), (Frequency::Hourly, 24)];
        for (f, s) in expected {
            assert_eq!(f.seasonality().get(), s, "{f}");
        }
    }

    #[test]
    fn hourly_stamps_infer_h() {
        let g = vec![("a".to_string(), stamps("2021-01-01 00:00:00", Frequency::Hourly, 30))];
        let (f, s) = infer_frequency(&g).unwrap();
        assert_eq!(f, Frequency::Hourly);
        assert_eq!(s.get(), 24);
    }

    #[test]
    fn monthly_stamps_infer_m() {
        let g = vec![("a".to_string(), stamps("2019-01-31 00:00:00", Frequency::Monthly, 14))];
        let (f, s) = infer_frequency(&g).unwrap();
        assert_eq!(f, Frequency::Monthly);
        assert_eq!(s.get(), 12);
    }

    #[test]
    fn ninety_minute_spacing_is_ambiguous() {
        let start = dt("2021-01-01 00:00:00");
        let g = vec![("a".to_string(), (0..10).map(|k| start + Duration::minutes(90 * k)).collect::<Vec<_>>())];
        assert!(matches!(infer_frequency(&g), Err(PanelError::AmbiguousFrequency)));
    }

    #[test]
    fn singleton_series_rejected() {
        let g = vec![("a".to_string(), vec![dt("2021-01-01 00:00:00")])];
        assert!(matches!(infer_frequency(&g), Err(PanelError::SingletonSeries(id)) if id == "a"));
    }

    #[test]
    fn month_end_anchor_is_kept() {
        let s = dt("2020-01-31 00:00:00");
        assert_eq!(Frequency::Monthly.advance(s, 1), dt("2020-02-29 00:00:00"));
        assert_eq!(Frequency::Monthly.advance(s, 2), dt("2020-03-31 00:00:00"));
        assert_eq!(Frequency::Monthly.advance(dt("2020-02-29 00:00:00"), 1), dt("2020-03-31 00:00:00"));
        assert_eq!(Frequency::Quarterly.advance(s, -1), dt("2019-10-31 00:00:00"));
        assert_eq!(Frequency::Yearly.advance(dt("2020-03-15 00:00:00"), 2), dt("2022-03-15 00:00:00"));
    }

    #[test]
    fn parse_aliases() {
        assert_eq!("ms".parse::<Frequency>().unwrap(), Frequency::Monthly);
        assert_eq!("A".parse::<Frequency>().unwrap(), Frequency::Yearly);
        assert!("5min".parse::<Frequency>().is_err());
    }
}
