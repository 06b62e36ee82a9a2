//! Price CSV ingestion and trading-session labelling.
//!
//! Files are `timestamp,price[,session]` with ISO-8601 timestamps. A header
//! row is detected when the first field of the first row does not start with
//! a digit. Paths ending in `.gz` are decompressed transparently.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime, NaiveTime};
use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Resolution {
    Daily,
    Intraday,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceRecord {
    pub timestamp: NaiveDateTime,
    pub price: f64,
    pub session_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub records: Vec<PriceRecord>,
    pub resolution: Resolution,
    pub source_label: String,
}

impl PriceSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.price).collect()
    }

    /// Number of positions where the session label changes.
    pub fn session_boundaries(&self) -> usize {
        self.records
            .windows(2)
            .filter(|w| w[0].session_id != w[1].session_id)
            .count()
    }

    /// Median number of records per session.
    pub fn median_session_length(&self) -> usize {
        let mut lengths = Vec::new();
        let mut run = 0usize;
        let mut current = None;
        for r in &self.records {
            if current == Some(r.session_id) {
                run += 1;
            } else {
                if run > 0 {
                    lengths.push(run);
                }
                current = Some(r.session_id);
                run = 1;
            }
        }
        if run > 0 {
            lengths.push(run);
        }
        lengths.sort_unstable();
        lengths.get(lengths.len() / 2).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestConfig {
    /// Forces the resolution; detected from the timestamps when `None`.
    pub resolution: Option<Resolution>,
    /// Label stored on the series; defaults to the file name.
    pub source_label: Option<String>,
}

pub fn load_csv(path: impl AsRef<Path>, config: &IngestConfig) -> Result<PriceSeries> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = config.source_label.clone().unwrap_or_else(|| {
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    if is_gz {
        read_csv(GzDecoder::new(BufReader::new(file)), config, label)
    } else {
        read_csv(BufReader::new(file), config, label)
    }
}

/// Parses a price CSV from any reader.
pub fn read_csv<R: Read>(reader: R, config: &IngestConfig, label: String) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);

    let mut rows: Vec<(NaiveDateTime, f64, Option<u64>)> = Vec::new();
    let mut first = true;
    for result in rdr.records() {
        let record = result?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        if first {
            first = false;
            let looks_numeric = record
                .get(0)
                .and_then(|f| f.chars().next())
                .is_some_and(|c| c.is_ascii_digit());
            if !looks_numeric {
                continue;
            }
        }
        if record.len() < 2 || record.len() > 3 {
            return Err(Error::Parse {
                line,
                message: format!("expected 2 or 3 fields, found {}", record.len()),
            });
        }
        let timestamp = parse_timestamp(&record[0]).ok_or_else(|| Error::Parse {
            line,
            message: format!("unrecognised timestamp `{}`", &record[0]),
        })?;
        let price: f64 = record[1].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid price `{}`", &record[1]),
        })?;
        if price.is_nan() || price.is_infinite() {
            return Err(Error::Parse {
                line,
                message: format!("non-finite price `{}`", &record[1]),
            });
        }
        if price <= 0.0 {
            return Err(Error::NonPositivePrice { row: line, price });
        }
        let session = match record.get(2) {
            Some(s) if !s.is_empty() => Some(s.parse::<u64>().map_err(|_| Error::Parse {
                line,
                message: format!("invalid session label `{s}`"),
            })?),
            _ => None,
        };
        rows.push((timestamp, price, session));
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let with_session = rows.iter().filter(|r| r.2.is_some()).count();
    if with_session != 0 && with_session != rows.len() {
        return Err(Error::Parse {
            line: 0,
            message: "session column present on some rows only".into(),
        });
    }

    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateTimestamp {
            timestamp: w[0].0.to_string(),
        });
    }

    let resolution = config
        .resolution
        .unwrap_or_else(|| detect_resolution(&rows));
    let supplied = with_session == rows.len();
    let records: Vec<PriceRecord> = rows
        .into_iter()
        .map(|(timestamp, price, session)| PriceRecord {
            timestamp,
            price,
            session_id: session.unwrap_or(0),
        })
        .collect();
    let series = PriceSeries {
        records,
        resolution,
        source_label: label,
    };
    if supplied {
        if let Some(i) = series
            .records
            .windows(2)
            .position(|w| w[1].session_id < w[0].session_id)
        {
            return Err(Error::NonMonotonicSession { row: i + 1 });
        }
        Ok(series)
    } else {
        Ok(assign_sessions(series))
    }
}

fn detect_resolution(rows: &[(NaiveDateTime, f64, Option<u64>)]) -> Resolution {
    let all_midnight = rows.iter().all(|r| r.0.time() == NaiveTime::MIN);
    let distinct_dates = rows.windows(2).all(|w| w[0].0.date() != w[1].0.date());
    if all_midnight && distinct_dates {
        Resolution::Daily
    } else {
        Resolution::Intraday
    }
}

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DD[T ]HH:MM[:SS[.fff]]`, and RFC 3339 with
/// an offset (the local wall-clock part is kept).
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ];
    for fmt in FORMATS {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t);
        }
    }
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d.and_time(NaiveTime::MIN));
    }
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|t| t.naive_local())
}

/// Relabels sessions so the id increments exactly when the calendar date
/// changes between consecutive records. At daily resolution every record
/// has its own date and therefore its own session.
pub fn assign_sessions(mut series: PriceSeries) -> PriceSeries {
    let mut session = 0u64;
    let mut prev: Option<NaiveDate> = None;
    for r in &mut series.records {
        let date = r.timestamp.date();
        if let Some(p) = prev {
            if p != date {
                session += 1;
            }
        }
        r.session_id = session;
        prev = Some(date);
    }
    series
}

/// Writes `timestamp,price,session` rows with a header.
pub fn write_csv<W: Write>(series: &PriceSeries, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "price", "session"])?;
    for r in &series.records {
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S").to_string(),
            r.price.to_string(),
            r.session_id.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PriceSeries> {
        read_csv(text.as_bytes(), &IngestConfig::default(), "test".into())
    }

    #[test]
    fn three_rows_one_session() {
        let s =
            parse("2020-01-02T09:30:00,10.0\n2020-01-02T09:31:00,10.2\n2020-01-02T09:32:00,10.1\n")
                .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.resolution, Resolution::Intraday);
        assert!(s.records.iter().all(|r| r.session_id == 0));
    }

    #[test]
    fn negative_price_reports_row() {
        let err = parse("timestamp,price\n2020-01-02,10.0\n2020-01-03,-5.0\n").unwrap_err();
        match err {
            Error::NonPositivePrice { row, price } => {
                assert_eq!(row, 3);
                assert_eq!(price, -5.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_row_has_line_number() {
        let err = parse("2020-01-02,10.0\n2020-01-03,abc\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn duplicate_and_empty() {
        assert!(matches!(
            parse("2020-01-02,10.0\n2020-01-02,11.0\n"),
            Err(Error::DuplicateTimestamp { .. })
        ));
        assert!(matches!(parse("timestamp,price\n"), Err(Error::EmptyInput)));
    }

    #[test]
    fn rows_are_sorted() {
        let s = parse("2020-01-03,11.0\n2020-01-02,10.0\n").unwrap();
        assert_eq!(s.records[0].price, 10.0);
        assert_eq!(s.resolution, Resolution::Daily);
        assert_eq!(s.records[1].session_id, 1);
    }

    #[test]
    fn session_increments_on_date_change() {
        let s = parse(
            "2020-01-02 09:30,10\n2020-01-02 09:31,10\n2020-01-02 16:00,10\n2020-01-03 09:30,10\n",
        )
        .unwrap();
        let ids: Vec<u64> = s.records.iter().map(|r| r.session_id).collect();
        assert_eq!(ids, vec![0, 0, 0, 1]);
        assert_eq!(s.session_boundaries(), 1);
    }

    #[test]
    fn single_record_single_session() {
        let s = parse("2020-01-02T10:00:00,1.5\n").unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.records[0].session_id, 0);
    }

    #[test]
    fn supplied_sessions_kept_and_checked() {
        let s =
            parse("2020-01-02 09:30,10,7\n2020-01-02 09:31,10,7\n2020-01-02 09:32,10,8\n").unwrap();
        let ids: Vec<u64> = s.records.iter().map(|r| r.session_id).collect();
        assert_eq!(ids, vec![7, 7, 8]);
        assert!(matches!(
            parse("2020-01-02 09:30,10,2\n2020-01-02 09:31,10,1\n"),
            Err(Error::NonMonotonicSession { .. })
        ));
    }

    #[test]
    fn timestamp_formats() {
        for s in [
            "2021-03-04",
            "2021-03-04T10:11",
            "2021-03-04 10:11:12",
            "2021-03-04T10:11:12.5",
            "2021-03-04T10:11:12+02:00",
        ] {
            assert!(parse_timestamp(s).is_some(), "{s}");
        }
        assert!(parse_timestamp("04/03/2021").is_none());
    }

    #[test]
    fn assign_sessions_is_idempotent() {
        let s = parse("2020-01-02 09:30,10\n2020-01-03 09:30,10\n2020-01-03 09:31,10\n").unwrap();
        let again = assign_sessions(s.clone());
        assert_eq!(s, again);
    }
}
