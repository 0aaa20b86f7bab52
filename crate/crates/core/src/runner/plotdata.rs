//! Per-record plot tables: the raw stream joined with scores, threshold
//! detections, their classification, and window membership, ready for any
//! external plotting tool.

use crate::corpus::{format_timestamp, DataStream};
use crate::error::{Error, Result};
use crate::optimizer::apply_threshold;
use crate::scoring::{classify_detections, ApplicationProfile, Classification, WindowSpan};
use std::collections::BTreeMap;
use std::io::{BufWriter, Write};

pub const PLOT_HEADER: &str =
    "timestamp,value,anomaly_score,detection_flag,classification,window_flag,contribution";

/// Write one stream's plot table.
///
/// Every record gets a row. Rows inside the probationary period leave
/// `classification` and `window_flag` empty because those records are
/// excluded from scoring. Detection rows carry an uppercase
/// classification (`TP`, `FP`, `IGNORED`) and — for scored detections —
/// the exact weighted contribution that the profile adds to the raw score.
pub fn write_plot_csv<W: Write>(
    stream: &DataStream,
    scores: &[f64],
    windows: &[WindowSpan],
    threshold: f64,
    profile: &ApplicationProfile,
    writer: W,
) -> Result<()> {
    if scores.len() != stream.len() {
        return Err(Error::InvalidConfig(format!(
            "{} scores for a stream of {} records",
            scores.len(),
            stream.len()
        )));
    }
    let probation_end = stream.probation_end_index();
    let detections = apply_threshold(scores, threshold, probation_end)?;
    let classified = classify_detections(&detections, windows, probation_end, stream.len())?;
    let by_index: BTreeMap<usize, (&'static str, Option<f64>)> = classified
        .iter()
        .map(|d| {
            let (label, contribution) = match d.classification {
                Classification::TruePositive => ("TP", Some(d.contribution(profile))),
                Classification::FalsePositive => ("FP", Some(d.contribution(profile))),
                Classification::Ignored => ("IGNORED", Some(0.0)),
                Classification::Probationary => ("", None),
            };
            (d.index, (label, contribution))
        })
        .collect();

    let mut w = BufWriter::new(writer);
    let err = |e: std::io::Error| Error::io(std::path::PathBuf::new(), e);
    writeln!(w, "{PLOT_HEADER}").map_err(err)?;
    let mut next_window = 0;
    for (i, record) in stream.records().iter().enumerate() {
        while next_window < windows.len() && i > windows[next_window].end {
            next_window += 1;
        }
        let in_window = next_window < windows.len() && windows[next_window].contains(i);
        let (detection_flag, classification, contribution) = match by_index.get(&i) {
            Some((label, contribution)) => (
                1,
                *label,
                contribution.map(|c| c.to_string()).unwrap_or_default(),
            ),
            None => (0, "", String::new()),
        };
        let window_flag = if i < probation_end {
            String::new()
        } else {
            (in_window as u8).to_string()
        };
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            format_timestamp(&record.timestamp),
            record.value,
            scores[i],
            detection_flag,
            classification,
            window_flag,
            contribution
        )
        .map_err(err)?;
    }
    w.flush().map_err(err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, TimeRecord};

    fn stream(n: usize) -> DataStream {
        let start = parse_timestamp("2015-01-01 00:00:00").unwrap();
        let records = (0..n)
            .map(|i| TimeRecord {
                timestamp: start + chrono::Duration::seconds(60 * i as i64),
                value: i as f64,
            })
            .collect();
        DataStream::new("s.csv".into(), records, None).unwrap()
    }

    fn lines(buf: &[u8]) -> Vec<String> {
        String::from_utf8(buf.to_vec())
            .unwrap()
            .lines()
            .map(str::to_owned)
            .collect()
    }

    #[test]
    fn plot_rows_label_detections_and_windows() {
        // 20 records, probation ends at 3, window [6, 9].
        let s = stream(20);
        let mut scores = vec![0.0; 20];
        scores[1] = 0.9; // probation: never a detection
        scores[7] = 0.9; // TP
        scores[8] = 0.9; // IGNORED (window already claimed)
        scores[12] = 0.9; // FP
        let windows = vec![WindowSpan { begin: 6, end: 9 }];
        let profile = ApplicationProfile::standard();
        let mut buf = Vec::new();
        write_plot_csv(&s, &scores, &windows, 0.5, &profile, &mut buf).unwrap();

        let rows = lines(&buf);
        assert_eq!(rows.len(), 21);
        assert_eq!(rows[0], PLOT_HEADER);
        // Probation row: no detection, empty classification and window flag.
        assert_eq!(rows[2], "2015-01-01 00:01:00,1,0.9,0,,,");
        // TP row carries its positive weighted contribution: the detection
        // lands halfway into the window, so sigma(-0.5) ~ 0.848.
        let tp: Vec<&str> = rows[8].split(',').collect();
        assert_eq!(&tp[3..6], &["1", "TP", "1"]);
        assert!((tp[6].parse::<f64>().unwrap() - 0.8482836399575131).abs() < 1e-12);
        // A later detection in the same window is ignored, contributing 0.
        let ignored: Vec<&str> = rows[9].split(',').collect();
        assert_eq!(&ignored[3..7], &["1", "IGNORED", "1", "0"]);
        // FP row: negative contribution, outside any window.
        let fp: Vec<&str> = rows[13].split(',').collect();
        assert_eq!(&fp[3..6], &["1", "FP", "0"]);
        assert!(fp[6].parse::<f64>().unwrap() < 0.0);
        // Quiet post-probation row outside windows.
        assert_eq!(rows[5], "2015-01-01 00:04:00,4,0,0,,0,");
    }

    #[test]
    fn score_length_mismatch_is_an_error() {
        let s = stream(10);
        let profile = ApplicationProfile::standard();
        let err = write_plot_csv(&s, &[0.0; 4], &[], 0.5, &profile, Vec::new()).unwrap_err();
        assert!(err.to_string().contains("4 scores"));
    }
}
