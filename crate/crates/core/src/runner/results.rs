//! Detector results on disk: one CSV per stream under a per-detector tree.
//!
//! Layout mirrors the common published convention so third-party results
//! can be scored directly: `<results>/<detector>/<stream dirs>/<detector>_
//! <stream file>.csv`, each file `timestamp,value,anomaly_score` with one
//! row per record in stream order.

use crate::corpus::{format_timestamp, parse_timestamp, Corpus, DataStream};
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

/// Results path for one stream, relative to the results root.
pub fn results_rel_path(detector_dir: &str, stream_name: &str) -> PathBuf {
    let stream = Path::new(stream_name);
    let file = stream
        .file_name()
        .map(|f| f.to_string_lossy())
        .unwrap_or_default();
    let prefixed = format!("{detector_dir}_{file}");
    let mut path = PathBuf::from(detector_dir);
    if let Some(parent) = stream.parent() {
        path.push(parent);
    }
    path.push(prefixed);
    path
}

pub fn write_results_csv<W: Write>(stream: &DataStream, scores: &[f64], writer: W) -> Result<()> {
    debug_assert_eq!(stream.len(), scores.len());
    let mut w = BufWriter::new(writer);
    let err = |e: std::io::Error| Error::io(PathBuf::new(), e);
    writeln!(w, "timestamp,value,anomaly_score").map_err(err)?;
    for (record, score) in stream.records().iter().zip(scores) {
        writeln!(
            w,
            "{},{},{}",
            format_timestamp(&record.timestamp),
            record.value,
            score
        )
        .map_err(err)?;
    }
    w.flush().map_err(err)
}

/// Write one stream's results under `results_root`, creating directories.
pub fn write_results_file(
    results_root: &Path,
    detector_dir: &str,
    stream: &DataStream,
    scores: &[f64],
) -> Result<PathBuf> {
    let path = results_root.join(results_rel_path(detector_dir, stream.name()));
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent.to_path_buf(), e))?;
    }
    let file = fs::File::create(&path).map_err(|e| Error::io(path.clone(), e))?;
    write_results_csv(stream, scores, file)?;
    Ok(path)
}

/// Read a results CSV and return its score column, validating that the
/// rows align one-to-one with `stream`'s records. Columns beyond the first
/// three are tolerated and ignored.
pub fn read_results_csv<R: Read>(reader: R, stream: &DataStream, path: &Path) -> Result<Vec<f64>> {
    let display = path.display().to_string();
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(BufReader::new(reader));
    let parse_err = |line: u64, message: String| Error::Parse {
        path: display.clone(),
        line,
        message,
    };
    {
        let headers = csv.headers().map_err(|e| parse_err(1, e.to_string()))?;
        let expected = ["timestamp", "value", "anomaly_score"];
        let got: Vec<&str> = headers.iter().take(3).collect();
        if got != expected {
            return Err(parse_err(
                1,
                format!("header must start with {}", expected.join(",")),
            ));
        }
    }
    let mut scores = Vec::with_capacity(stream.len());
    for (i, row) in csv.records().enumerate() {
        let line = i as u64 + 2;
        let row = row.map_err(|e| parse_err(line, e.to_string()))?;
        if i >= stream.len() {
            return Err(parse_err(
                line,
                format!("more rows than the stream's {} records", stream.len()),
            ));
        }
        if row.len() < 3 {
            return Err(parse_err(line, "expected at least 3 columns".into()));
        }
        let ts = parse_timestamp(&row[0])
            .ok_or_else(|| parse_err(line, format!("bad timestamp `{}`", &row[0])))?;
        if ts != stream.records()[i].timestamp {
            return Err(parse_err(
                line,
                format!(
                    "timestamp {} does not match the stream's {}",
                    &row[0],
                    format_timestamp(&stream.records()[i].timestamp)
                ),
            ));
        }
        let score: f64 = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("bad anomaly score `{}`", &row[2])))?;
        scores.push(score);
    }
    if scores.len() != stream.len() {
        return Err(parse_err(
            scores.len() as u64 + 1,
            format!(
                "{} rows for a stream of {} records",
                scores.len(),
                stream.len()
            ),
        ));
    }
    Ok(scores)
}

/// Locate and read one stream's results. Falls back to an unprefixed file
/// name so hand-built result trees score without renaming.
pub fn read_results_file(
    results_root: &Path,
    detector_dir: &str,
    stream: &DataStream,
) -> Result<Vec<f64>> {
    let preferred = results_root.join(results_rel_path(detector_dir, stream.name()));
    let fallback = results_root.join(detector_dir).join(stream.name());
    let path = if preferred.is_file() {
        preferred
    } else if fallback.is_file() {
        fallback
    } else {
        return Err(Error::MissingFile(format!(
            "no results for `{}` at {}",
            stream.name(),
            preferred.display()
        )));
    };
    let file = fs::File::open(&path).map_err(|e| Error::io(path.clone(), e))?;
    read_results_csv(file, stream, &path)
}

/// Read results for every stream of the corpus.
pub fn load_corpus_results(
    results_root: &Path,
    detector_dir: &str,
    corpus: &Corpus,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let jobs: Vec<&DataStream> = corpus.streams().iter().collect();
    let loaded = crate::par::try_map(jobs, |stream| {
        read_results_file(results_root, detector_dir, stream)
            .map(|scores| (stream.name().to_owned(), scores))
    })?;
    Ok(loaded.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, TimeRecord};

    fn stream(n: usize) -> DataStream {
        let start = parse_timestamp("2015-01-01 00:00:00").unwrap();
        let records = (0..n)
            .map(|i| TimeRecord {
                timestamp: start + chrono::Duration::seconds(300 * i as i64),
                value: i as f64 * 1.5,
            })
            .collect();
        DataStream::new("sub/a.csv".into(), records, None).unwrap()
    }

    #[test]
    fn rel_path_prefixes_the_file_name() {
        assert_eq!(
            results_rel_path("null", "sub/a.csv"),
            PathBuf::from("null/sub/null_a.csv")
        );
        assert_eq!(
            results_rel_path("sky", "b.csv"),
            PathBuf::from("sky/sky_b.csv")
        );
    }

    #[test]
    fn results_round_trip() {
        let s = stream(5);
        let scores = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let mut buf = Vec::new();
        write_results_csv(&s, &scores, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("timestamp,value,anomaly_score\n2015-01-01 00:00:00,0,0\n"));
        let back = read_results_csv(buf.as_slice(), &s, Path::new("x.csv")).unwrap();
        assert_eq!(back, scores);
    }

    #[test]
    fn full_precision_scores_survive_the_round_trip() {
        let s = stream(3);
        let scores = vec![0.1234567890123456, 1.0 / 3.0, 0.9999999999999999];
        let mut buf = Vec::new();
        write_results_csv(&s, &scores, &mut buf).unwrap();
        let back = read_results_csv(buf.as_slice(), &s, Path::new("x.csv")).unwrap();
        assert_eq!(back, scores);
    }

    #[test]
    fn misaligned_rows_are_rejected() {
        let s = stream(3);
        let text = "timestamp,value,anomaly_score\n2015-01-01 00:00:00,0,0.5\n";
        let err = read_results_csv(text.as_bytes(), &s, Path::new("x.csv")).unwrap_err();
        assert!(err.to_string().contains("1 rows for a stream of 3"));

        let text = "timestamp,value,anomaly_score\n2015-01-01 00:05:00,0,0.5\n\
                    2015-01-01 00:05:00,1,0.5\n2015-01-01 00:10:00,2,0.5\n";
        let err = read_results_csv(text.as_bytes(), &s, Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn extra_columns_are_tolerated() {
        let s = stream(2);
        let text = "timestamp,value,anomaly_score,label\n\
                    2015-01-01 00:00:00,0,0.5,1\n2015-01-01 00:05:00,1.5,0.75,0\n";
        let scores = read_results_csv(text.as_bytes(), &s, Path::new("x.csv")).unwrap();
        assert_eq!(scores, vec![0.5, 0.75]);
    }

    #[test]
    fn wrong_header_is_rejected() {
        let s = stream(2);
        let text = "time,value,score\n2015-01-01 00:00:00,0,0.5\n";
        assert!(read_results_csv(text.as_bytes(), &s, Path::new("x.csv")).is_err());
    }
}
