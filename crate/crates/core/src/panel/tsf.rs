//! Reader for the `.tsf` format used by the Monash forecasting repository.
//!
//! A file is a block of `@` header lines followed by `@data` and one series
//! per line: `name:start_timestamp:v1,v2,...`, where the colon-separated
//! attributes follow the order of the `@attribute` declarations and `?`
//! marks a missing value.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::NaiveDateTime;
use indexmap::IndexMap;

use super::{Frequency, PanelError, TimeSeries, TimeSeriesFrame};

#[derive(Debug, Clone)]
pub struct TsfDataset {
    pub frame: TimeSeriesFrame,
    /// Forecast horizon declared by the file, if any.
    pub horizon: Option<usize>,
}

pub fn load_tsf(path: impl AsRef<Path>) -> Result<TsfDataset, PanelError> {
    read_tsf(File::open(path.as_ref())?)
}

pub fn read_tsf<R: Read>(reader: R) -> Result<TsfDataset, PanelError> {
    let err = |line: usize, message: String| PanelError::Tsf { line, message };
    let mut attributes: Vec<(String, String)> = Vec::new();
    let mut frequency = None;
    let mut horizon = None;
    let mut in_data = false;
    let mut series = IndexMap::new();

    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !in_data {
            let mut parts = line.splitn(2, char::is_whitespace);
            let key = parts.next().unwrap_or_default().to_ascii_lowercase();
            let value = parts.next().unwrap_or_default().trim();
            match key.as_str() {
                "@attribute" => {
                    let mut kv = value.split_whitespace();
                    let name = kv.next().ok_or_else(|| err(lineno, "attribute without name".into()))?;
                    let kind = kv.next().ok_or_else(|| err(lineno, "attribute without type".into()))?;
                    attributes.push((name.to_string(), kind.to_ascii_lowercase()));
                }
                "@frequency" => {
                    frequency = Some(value.parse::<Frequency>().map_err(|e| err(lineno, e.to_string()))?);
                }
                "@horizon" => {
                    horizon = Some(value.parse::<usize>().map_err(|e| err(lineno, e.to_string()))?);
                }
                "@data" => in_data = true,
                _ => {}
            }
            continue;
        }

        let fields: Vec<&str> = line.split(':').collect();
        if fields.len() != attributes.len() + 1 {
            return Err(err(lineno, format!("expected {} fields, found {}", attributes.len() + 1, fields.len())));
        }
        let mut name = None;
        let mut start = None;
        for ((attr, kind), raw) in attributes.iter().zip(&fields) {
            match kind.as_str() {
                "date" => {
                    let ts = NaiveDateTime::parse_from_str(raw, "%Y-%m-%d %H-%M-%S")
                        .map_err(|e| err(lineno, format!("bad start timestamp `{raw}`: {e}")))?;
                    start = Some(ts);
                }
                _ if name.is_none() && (attr == "series_name" || kind == "string") => name = Some(raw.to_string()),
                _ => {}
            }
        }
        let name = name.unwrap_or_else(|| format!("T{}", series.len() + 1));
        let start = start.ok_or_else(|| err(lineno, "series without start timestamp".into()))?;
        let values = fields[fields.len() - 1]
            .split(',')
            .map(|v| match v.trim() {
                "?" => Err(PanelError::MissingValue { id: name.clone(), timestamp: start }),
                v => v.parse::<f64>().map_err(|_| err(lineno, format!("bad value `{v}`"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        series.insert(name, TimeSeries::new(start, values));
    }
    if series.is_empty() {
        return Err(PanelError::EmptyData);
    }
    let frequency = frequency.ok_or_else(|| err(0, "missing @frequency".into()))?;
    Ok(TsfDataset { frame: TimeSeriesFrame::new(frequency, series)?, horizon })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_header_and_rows() {
        let text = "# comment\n@relation demo\n@attribute series_name string\n@attribute start_timestamp date\n\
                    @frequency quarterly\n@horizon 8\n@missing false\n@equallength false\n@data\n\
                    A1:1990-01-01 00-00-00:1,2,3.5\nA2:1991-04-01 00-00-00:4,5\n";
        let d = read_tsf(text.as_bytes()).unwrap();
        assert_eq!(d.horizon, Some(8));
        assert_eq!(d.frame.frequency(), Frequency::Quarterly);
        assert_eq!(d.frame.get("A1").unwrap().target, vec![1.0, 2.0, 3.5]);
        assert_eq!(d.frame.get("A2").unwrap().len(), 2);
    }

    #[test]
    fn missing_values_are_rejected() {
        let text = "@attribute series_name string\n@attribute start_timestamp date\n@frequency yearly\n@data\nA:2000-01-01 00-00-00:1,?,3\n";
        assert!(matches!(read_tsf(text.as_bytes()), Err(PanelError::MissingValue { .. })));
    }
}
