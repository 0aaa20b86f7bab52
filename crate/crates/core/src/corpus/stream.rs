//! Data stream parsing and validation.

use crate::error::{Error, Result};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Calendar timestamps at second resolution, no timezone.
pub type Timestamp = chrono::NaiveDateTime;

const TS_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// Fraction of a file reserved as the probationary period.
pub const PROBATION_FRACTION: f64 = 0.15;

/// Parse `YYYY-MM-DD HH:MM:SS`, tolerating a fractional-seconds suffix as
/// found in some published windows files.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    Timestamp::parse_from_str(s.trim(), TS_FORMAT)
        .or_else(|_| Timestamp::parse_from_str(s.trim(), "%Y-%m-%d %H:%M:%S%.f"))
        .ok()
}

pub fn format_timestamp(ts: &Timestamp) -> String {
    ts.format(TS_FORMAT).to_string()
}

/// One observation: a timestamp plus a single scalar value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeRecord {
    pub timestamp: Timestamp,
    pub value: f64,
}

/// An ordered sequence of records read from one corpus file, with the
/// probationary boundary precomputed.
///
/// Invariants, enforced at construction: at least two records, strictly
/// increasing timestamps, finite values, and `probation_end_index` in range.
/// Records with index below `probation_end_index` are probationary; the
/// record at `probation_end_index` is the first scored one.
#[derive(Debug, Clone)]
pub struct DataStream {
    name: String,
    records: Vec<TimeRecord>,
    probation_end_index: usize,
}

impl DataStream {
    /// Validate `records` and compute the probation boundary.
    pub fn new(
        name: String,
        records: Vec<TimeRecord>,
        probation_cap: Option<usize>,
    ) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::InvalidStream {
                path: name,
                message: format!(
                    "stream must contain at least 2 records, got {}",
                    records.len()
                ),
            });
        }
        for (i, rec) in records.iter().enumerate() {
            if !rec.value.is_finite() {
                return Err(Error::InvalidStream {
                    path: name,
                    message: format!("non-finite value at record {i}"),
                });
            }
            if i > 0 && rec.timestamp <= records[i - 1].timestamp {
                // Line 1 is the header, so record i sits on line i + 2.
                return Err(Error::NonMonotonicTimestamp {
                    path: name,
                    line: i as u64 + 2,
                });
            }
        }
        let probation_end_index = probation_length(records.len(), probation_cap);
        Ok(Self {
            name,
            records,
            probation_end_index,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn records(&self) -> &[TimeRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Index of the first record that is scored. Everything before it is
    /// the probationary period.
    pub fn probation_end_index(&self) -> usize {
        self.probation_end_index
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.value)
    }

    /// Index of the record carrying exactly this timestamp.
    pub fn index_of_timestamp(&self, ts: &Timestamp) -> Option<usize> {
        self.records.binary_search_by(|r| r.timestamp.cmp(ts)).ok()
    }

    /// First record index with timestamp >= `ts`.
    pub fn index_at_or_after(&self, ts: &Timestamp) -> Option<usize> {
        match self.records.binary_search_by(|r| r.timestamp.cmp(ts)) {
            Ok(i) => Some(i),
            Err(i) if i < self.records.len() => Some(i),
            Err(_) => None,
        }
    }

    /// Last record index with timestamp <= `ts`.
    pub fn index_at_or_before(&self, ts: &Timestamp) -> Option<usize> {
        match self.records.binary_search_by(|r| r.timestamp.cmp(ts)) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }
}

/// Length of the probationary period: `floor(0.15 * n_records)`, reduced to
/// `cap` when one is configured. Always less than `n_records`.
pub fn probation_length(n_records: usize, cap: Option<usize>) -> usize {
    let raw = (PROBATION_FRACTION * n_records as f64).floor() as usize;
    match cap {
        Some(c) => raw.min(c),
        None => raw,
    }
}

/// Parse one corpus CSV file. The header must be exactly `timestamp,value`.
pub fn parse_stream(path: &Path, name: String, probation_cap: Option<usize>) -> Result<DataStream> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_stream_reader(file, name, probation_cap)
}

/// Parse corpus CSV content from any reader; `name` becomes the stream name
/// and is used in diagnostics.
pub fn parse_stream_reader<R: Read>(
    reader: R,
    name: String,
    probation_cap: Option<usize>,
) -> Result<DataStream> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);

    let headers = csv_reader.headers().map_err(|e| Error::Parse {
        path: name.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() != 2 || &headers[0] != "timestamp" || &headers[1] != "value" {
        return Err(Error::Parse {
            path: name,
            line: 1,
            message: format!(
                "expected header `timestamp,value`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut records = Vec::new();
    for (i, row) in csv_reader.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| Error::Parse {
            path: name.clone(),
            line,
            message: e.to_string(),
        })?;
        if row.len() != 2 {
            return Err(Error::Parse {
                path: name,
                line,
                message: format!("expected 2 columns, got {}", row.len()),
            });
        }
        let timestamp = parse_timestamp(&row[0]).ok_or_else(|| Error::Parse {
            path: name.clone(),
            line,
            message: format!("unparseable timestamp `{}`", &row[0]),
        })?;
        let value: f64 = row[1].trim().parse().map_err(|_| Error::Parse {
            path: name.clone(),
            line,
            message: format!("unparseable value `{}`", &row[1]),
        })?;
        records.push(TimeRecord { timestamp, value });
    }

    DataStream::new(name, records, probation_cap)
}

/// Write a stream back to the corpus CSV format. Values use the shortest
/// round-trip decimal form, so `parse_stream(write_stream(s)) == s`.
pub fn write_stream<W: Write>(stream: &DataStream, writer: W) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let io_err = |e| Error::Io {
        path: stream.name().into(),
        source: e,
    };
    writeln!(w, "timestamp,value").map_err(io_err)?;
    for rec in stream.records() {
        writeln!(w, "{},{}", format_timestamp(&rec.timestamp), rec.value).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}
