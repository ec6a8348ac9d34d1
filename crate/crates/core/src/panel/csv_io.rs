use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{infer_frequency, Frequency, PanelError, StaticValue, TimeSeries, TimeSeriesFrame};

/// Which CSV columns play which role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub timestamp: String,
    /// `None` when the file carries no target (e.g. a future known-covariate
    /// file); targets are then filled with zeros.
    pub target: Option<String>,
    #[serde(default)]
    pub past_covariates: Vec<String>,
    #[serde(default)]
    pub known_covariates: Vec<String>,
    #[serde(default)]
    pub static_covariates: Vec<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            id: "item_id".into(),
            timestamp: "timestamp".into(),
            target: Some("target".into()),
            past_covariates: Vec::new(),
            known_covariates: Vec::new(),
            static_covariates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub columns: ColumnMap,
    /// Skip inference and use this frequency.
    pub frequency: Option<Frequency>,
    /// Forward-fill interior missing values and drop leading ones.
    pub fill_missing: bool,
    /// Reindex irregular series onto the regular grid, forward-filling gaps.
    pub fill_gaps: bool,
}

struct RawRow {
    ts: NaiveDateTime,
    target: Option<f64>,
    past: Vec<Option<f64>>,
    known: Vec<Option<f64>>,
    statics: Vec<String>,
}

pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<TimeSeriesFrame, PanelError> {
    let file = File::open(path.as_ref())?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<TimeSeriesFrame, PanelError> {
    let cols = &opts.columns;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| -> Result<usize, PanelError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PanelError::MissingColumn(name.to_string()))
    };
    let id_idx = find(&cols.id)?;
    let ts_idx = find(&cols.timestamp)?;
    let target_idx = cols.target.as_deref().map(find).transpose()?;
    let past_idx = cols.past_covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    let known_idx = cols.known_covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;
    let static_idx = cols.static_covariates.iter().map(|c| find(c)).collect::<Result<Vec<_>, _>>()?;

    let mut groups: IndexMap<String, Vec<RawRow>> = IndexMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |idx: usize| rec.get(idx).unwrap_or("");
        let ts_raw = field(ts_idx);
        let ts = parse_timestamp(ts_raw).ok_or_else(|| PanelError::UnparseableTimestamp {
            row,
            value: ts_raw.to_string(),
        })?;
        let num = |idx: usize, column: &str| parse_value(field(idx), row, column);
        let target = match target_idx {
            Some(idx) => num(idx, cols.target.as_deref().unwrap_or_default())?,
            None => Some(0.0),
        };
        let past = past_idx
            .iter()
            .zip(&cols.past_covariates)
            .map(|(&i, c)| num(i, c))
            .collect::<Result<Vec<_>, _>>()?;
        let known = known_idx
            .iter()
            .zip(&cols.known_covariates)
            .map(|(&i, c)| num(i, c))
            .collect::<Result<Vec<_>, _>>()?;
        let statics = static_idx.iter().map(|&i| field(i).to_string()).collect();
        groups
            .entry(field(id_idx).to_string())
            .or_default()
            .push(RawRow { ts, target, past, known, statics });
    }
    if groups.is_empty() {
        return Err(PanelError::EmptyData);
    }
    for (id, rows) in groups.iter_mut() {
        rows.sort_by_key(|r| r.ts);
        if let Some(w) = rows.windows(2).find(|w| w[0].ts == w[1].ts) {
            return Err(PanelError::DuplicateTimestamp { id: id.clone(), timestamp: w[0].ts });
        }
    }

    let frequency = match opts.frequency {
        Some(f) => f,
        None => {
            let stamps: Vec<(String, Vec<NaiveDateTime>)> = groups
                .iter()
                .map(|(id, rows)| (id.clone(), rows.iter().map(|r| r.ts).collect()))
                .collect();
            infer_frequency(&stamps)?.0
        }
    };

    let static_kinds: Vec<bool> = (0..cols.static_covariates.len())
        .map(|j| groups.values().flatten().all(|r| r.statics[j].parse::<f64>().is_ok()))
        .collect();

    let mut series = IndexMap::with_capacity(groups.len());
    for (id, rows) in groups {
        let s = assemble_series(&id, rows, frequency, opts, &static_kinds)?;
        series.insert(id, s);
    }
    TimeSeriesFrame::new(frequency, series)
}

fn assemble_series(
    id: &str,
    rows: Vec<RawRow>,
    freq: Frequency,
    opts: &LoadOptions,
    static_kinds: &[bool],
) -> Result<TimeSeries, PanelError> {
    let cols = &opts.columns;
    let start = rows[0].ts;
    // grid position of every row
    let mut positions = Vec::with_capacity(rows.len());
    let mut pos: i64 = 0;
    for (k, r) in rows.iter().enumerate() {
        if k > 0 {
            pos += 1;
            while freq.advance(start, pos) < r.ts {
                if !opts.fill_gaps {
                    return Err(PanelError::IrregularSpacing(id.to_string()));
                }
                pos += 1;
            }
        }
        if freq.advance(start, pos) != r.ts {
            return Err(PanelError::IrregularSpacing(id.to_string()));
        }
        positions.push(pos as usize);
    }
    let len = positions.last().copied().unwrap_or(0) + 1;

    let mut target = vec![None; len];
    let mut past = vec![vec![None; len]; cols.past_covariates.len()];
    let mut known = vec![vec![None; len]; cols.known_covariates.len()];
    for (r, &p) in rows.iter().zip(&positions) {
        if r.target.is_none() && !opts.fill_missing {
            return Err(PanelError::MissingValue { id: id.to_string(), timestamp: r.ts });
        }
        target[p] = r.target;
        for (j, v) in r.past.iter().enumerate() {
            past[j][p] = *v;
        }
        for (j, v) in r.known.iter().enumerate() {
            known[j][p] = *v;
        }
    }
    if !opts.fill_missing {
        let names = cols.past_covariates.iter().zip(&past).chain(cols.known_covariates.iter().zip(&known));
        for (name, values) in names {
            let missing_row = rows.iter().zip(&positions).any(|(_, &p)| values[p].is_none());
            if missing_row {
                return Err(PanelError::MissingCovariate { id: id.to_string(), name: name.clone() });
            }
        }
    }

    // leading target gaps are dropped, the rest forward-filled
    let lead = target.iter().position(Option::is_some).ok_or_else(|| PanelError::EmptySeries(id.to_string()))?;
    let target = forward_fill(&target[lead..]).expect("first value present");
    let mut ts = TimeSeries::new(freq.advance(start, lead as i64), target);
    for (name, values) in cols.past_covariates.iter().zip(past) {
        let filled = fill_covariate(&values[lead..])
            .ok_or_else(|| PanelError::MissingCovariate { id: id.to_string(), name: name.clone() })?;
        ts.past_covariates.insert(name.clone(), filled);
    }
    for (name, values) in cols.known_covariates.iter().zip(known) {
        let filled = fill_covariate(&values[lead..])
            .ok_or_else(|| PanelError::MissingCovariate { id: id.to_string(), name: name.clone() })?;
        ts.known_covariates.insert(name.clone(), filled);
    }
    for (j, name) in cols.static_covariates.iter().enumerate() {
        let first = &rows[0].statics[j];
        if rows.iter().any(|r| &r.statics[j] != first) {
            return Err(PanelError::InconsistentStatic { id: id.to_string(), name: name.clone() });
        }
        let value = if static_kinds[j] {
            StaticValue::Real(first.parse().expect("checked numeric"))
        } else {
            StaticValue::Category(first.clone())
        };
        ts.static_covariates.insert(name.clone(), value);
    }
    Ok(ts)
}

fn forward_fill(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let mut last = values.first().copied().flatten()?;
    Some(
        values
            .iter()
            .map(|v| {
                if let Some(x) = v {
                    last = *x;
                }
                last
            })
            .collect(),
    )
}

/// Forward fill, then back-fill a leading gap.
fn fill_covariate(values: &[Option<f64>]) -> Option<Vec<f64>> {
    let first = values.iter().flatten().next().copied()?;
    let mut v = values.to_vec();
    if v[0].is_none() {
        v[0] = Some(first);
    }
    forward_fill(&v)
}

fn parse_value(raw: &str, row: usize, column: &str) -> Result<Option<f64>, PanelError> {
    if raw.is_empty() || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") || raw == "?" {
        return Ok(None);
    }
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(PanelError::InvalidValue { row, column: column.to_string(), value: raw.to_string() }),
    }
}

/// Parse an ISO-8601 date or date-time. Offsets are converted to UTC.
pub(crate) fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    if let Ok(d) = NaiveDate::parse_from_str(raw, "%Y-%m-%d") {
        return d.and_hms_opt(0, 0, 0);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(raw, fmt) {
            return Some(dt);
        }
    }
    DateTime::parse_from_rfc3339(raw).ok().map(|dt| dt.naive_utc())
}

pub(crate) fn format_timestamp(freq: Frequency, ts: NaiveDateTime) -> String {
    if freq.is_date_only() && ts.time() == chrono::NaiveTime::MIN {
        ts.format("%Y-%m-%d").to_string()
    } else {
        ts.format("%Y-%m-%d %H:%M:%S").to_string()
    }
}

/// Write a frame in long format: `item_id,timestamp,target` followed by
/// past, known and static covariate columns. Values use the shortest
/// representation that parses back to the same float.
pub fn write_csv<W: Write>(frame: &TimeSeriesFrame, writer: W) -> Result<(), PanelError> {
    let mut w = csv::Writer::from_writer(writer);
    let (past, known, statics) = frame.covariate_names();
    let mut header = vec!["item_id".to_string(), "timestamp".to_string(), "target".to_string()];
    header.extend(past.iter().cloned());
    header.extend(known.iter().cloned());
    header.extend(statics.iter().cloned());
    w.write_record(&header)?;
    for (id, s) in frame.iter() {
        for k in 0..s.len() {
            let mut rec = vec![
                id.clone(),
                format_timestamp(frame.frequency(), frame.frequency().advance(s.start, k as i64)),
                s.target[k].to_string(),
            ];
            rec.extend(past.iter().map(|n| s.past_covariates[n][k].to_string()));
            rec.extend(known.iter().map(|n| s.known_covariates[n][k].to_string()));
            rec.extend(statics.iter().map(|n| match &s.static_covariates[n] {
                StaticValue::Real(v) => v.to_string(),
                StaticValue::Category(c) => c.clone(),
            }));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
