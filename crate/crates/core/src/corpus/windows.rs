//! Anomaly window generation and the combined-windows JSON format.

use super::labels::GroundTruthLabels;
use super::stream::{format_timestamp, parse_timestamp, DataStream, Timestamp};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Default fraction of a file covered by anomaly windows.
pub const DEFAULT_WINDOW_FRACTION: f64 = 0.10;

#[derive(Debug, Clone, Copy)]
pub struct WindowConfig {
    /// Fraction of the file length shared among the file's windows.
    pub fraction: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            fraction: DEFAULT_WINDOW_FRACTION,
        }
    }
}

/// A closed interval of records centered on a ground-truth anomaly label.
/// The unit of true-positive / false-negative accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnomalyWindow {
    pub begin_index: usize,
    pub end_index: usize,
    /// Record index of the earliest label this window was built from.
    pub label_index: usize,
    pub begin: Timestamp,
    pub end: Timestamp,
    pub source_label: Timestamp,
}

impl AnomalyWindow {
    pub fn len(&self) -> usize {
        self.end_index - self.begin_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.begin_index <= index && index <= self.end_index
    }

    pub fn span(&self) -> crate::scoring::WindowSpan {
        crate::scoring::WindowSpan {
            begin: self.begin_index,
            end: self.end_index,
        }
    }
}

/// Per-window record count before clamping and merging:
/// `floor(fraction * n_records / n_labels)`.
pub fn window_width(n_records: usize, n_labels: usize, fraction: f64) -> usize {
    (fraction * n_records as f64 / n_labels as f64).floor() as usize
}

/// Build anomaly windows for a stream with the default 10% rule.
pub fn make_windows(stream: &DataStream, labels: &GroundTruthLabels) -> Result<Vec<AnomalyWindow>> {
    make_windows_with(stream, labels, &WindowConfig::default())
}

/// Build anomaly windows for a stream.
///
/// Each window spans `floor(fraction * n / k)` records centered on its label
/// (`floor(W/2)` records before, `W - 1 - floor(W/2)` after), clamped to
/// `[probation_end_index, n - 1]`. Overlapping windows are merged, keeping
/// the earliest source label. The result is sorted and disjoint.
pub fn make_windows_with(
    stream: &DataStream,
    labels: &GroundTruthLabels,
    config: &WindowConfig,
) -> Result<Vec<AnomalyWindow>> {
    let label_indices = labels.record_indices(stream)?;
    if label_indices.is_empty() {
        return Ok(Vec::new());
    }

    let n = stream.len();
    let width = window_width(n, label_indices.len(), config.fraction);
    if width == 0 {
        return Err(Error::InvalidStream {
            path: stream.name().to_owned(),
            message: format!(
                "{} labels on {} records make the {:.0}% window rule degenerate (width 0)",
                label_indices.len(),
                n,
                config.fraction * 100.0
            ),
        });
    }

    let before = width / 2;
    let after = width - 1 - before;
    let probation = stream.probation_end_index();

    let mut raw: Vec<(usize, usize, usize)> = label_indices
        .iter()
        .map(|&label| {
            let begin = label.saturating_sub(before).max(probation);
            let end = (label + after).min(n - 1);
            (begin, end, label)
        })
        .collect();
    raw.sort();

    // Merge overlaps; adjacent windows stay separate.
    let mut merged: Vec<(usize, usize, usize)> = Vec::with_capacity(raw.len());
    for (begin, end, label) in raw {
        match merged.last_mut() {
            Some((_, prev_end, _)) if begin <= *prev_end => {
                *prev_end = (*prev_end).max(end);
            }
            _ => merged.push((begin, end, label)),
        }
    }

    let records = stream.records();
    Ok(merged
        .into_iter()
        .map(|(begin, end, label)| AnomalyWindow {
            begin_index: begin,
            end_index: end,
            label_index: label,
            begin: records[begin].timestamp,
            end: records[end].timestamp,
            source_label: records[label].timestamp,
        })
        .collect())
}

/// Serialize a combined-windows map as JSON: corpus-relative path to an
/// array of `[begin, end]` timestamp pairs.
pub fn write_windows_file<W: Write>(
    windows: &BTreeMap<String, Vec<AnomalyWindow>>,
    writer: W,
) -> Result<()> {
    let map: BTreeMap<&str, Vec<[String; 2]>> = windows
        .iter()
        .map(|(name, ws)| {
            (
                name.as_str(),
                ws.iter()
                    .map(|w| [format_timestamp(&w.begin), format_timestamp(&w.end)])
                    .collect(),
            )
        })
        .collect();
    serde_json::to_writer_pretty(writer, &map).map_err(|source| Error::Json {
        path: "windows".into(),
        source,
    })
}

/// Parse a combined-windows JSON file into timestamp pairs per stream.
pub fn load_windows_file<R: Read>(
    reader: R,
    path: &Path,
) -> Result<BTreeMap<String, Vec<(Timestamp, Timestamp)>>> {
    let raw: BTreeMap<String, Vec<[String; 2]>> =
        serde_json::from_reader(reader).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
    let mut out = BTreeMap::new();
    for (name, pairs) in raw {
        let mut windows = Vec::with_capacity(pairs.len());
        for [begin, end] in pairs {
            let b = parse_timestamp(&begin).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}: unparseable window timestamp `{begin}` for {name}",
                    path.display()
                ))
            })?;
            let e = parse_timestamp(&end).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}: unparseable window timestamp `{end}` for {name}",
                    path.display()
                ))
            })?;
            if e < b {
                return Err(Error::InvalidConfig(format!(
                    "{}: window end `{end}` precedes begin `{begin}` for {name}",
                    path.display()
                )));
            }
            windows.push((b, e));
        }
        out.insert(name, windows);
    }
    Ok(out)
}

/// Map loaded timestamp windows onto a stream's record indices.
///
/// `begin` maps to the first record at or after it, `end` to the last record
/// at or before it, so windows from corpora with coarser timestamps still
/// resolve.
pub fn resolve_windows(
    stream: &DataStream,
    windows: &[(Timestamp, Timestamp)],
) -> Result<Vec<AnomalyWindow>> {
    let mut out = Vec::with_capacity(windows.len());
    for (begin_ts, end_ts) in windows {
        let begin = stream
            .index_at_or_after(begin_ts)
            .ok_or_else(|| Error::InvalidStream {
                path: stream.name().to_owned(),
                message: format!(
                    "window begin {} is after the stream ends",
                    format_timestamp(begin_ts)
                ),
            })?;
        let end = stream
            .index_at_or_before(end_ts)
            .ok_or_else(|| Error::InvalidStream {
                path: stream.name().to_owned(),
                message: format!(
                    "window end {} is before the stream starts",
                    format_timestamp(end_ts)
                ),
            })?;
        if end < begin {
            return Err(Error::InvalidStream {
                path: stream.name().to_owned(),
                message: format!(
                    "window [{}, {}] contains no records",
                    format_timestamp(begin_ts),
                    format_timestamp(end_ts)
                ),
            });
        }
        let records = stream.records();
        out.push(AnomalyWindow {
            begin_index: begin,
            end_index: end,
            label_index: begin,
            begin: records[begin].timestamp,
            end: records[end].timestamp,
            source_label: records[begin].timestamp,
        });
    }
    out.sort_by_key(|w| w.begin_index);
    Ok(out)
}
