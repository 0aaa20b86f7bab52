//! Ground-truth labels and the multi-labeler combining algorithm.

use super::stream::{format_timestamp, parse_timestamp, DataStream, Timestamp};
use crate::error::{Error, Result};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

/// Default fraction of labelers that must agree for a combined label.
pub const DEFAULT_AGREEMENT_FRACTION: f64 = 0.5;

/// Default clustering tolerance: 5% of the stream length, in records.
pub fn default_tolerance(n_records: usize) -> usize {
    (0.05 * n_records as f64).floor() as usize
}

/// Ordered, deduplicated anomaly timestamps for one stream. Each must
/// coincide with a record timestamp, outside the probationary period.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruthLabels {
    timestamps: Vec<Timestamp>,
}

impl GroundTruthLabels {
    pub fn from_timestamps(mut timestamps: Vec<Timestamp>) -> Self {
        timestamps.sort();
        timestamps.dedup();
        Self { timestamps }
    }

    pub fn timestamps(&self) -> &[Timestamp] {
        &self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Resolve labels to record indices in `stream`, rejecting timestamps
    /// that match no record or fall inside the probationary period.
    pub fn record_indices(&self, stream: &DataStream) -> Result<Vec<usize>> {
        let mut indices = Vec::with_capacity(self.timestamps.len());
        for ts in &self.timestamps {
            let index = stream
                .index_of_timestamp(ts)
                .ok_or_else(|| Error::LabelNotFound {
                    stream: stream.name().to_owned(),
                    timestamp: format_timestamp(ts),
                })?;
            if index < stream.probation_end_index() {
                return Err(Error::LabelInProbation {
                    stream: stream.name().to_owned(),
                    timestamp: format_timestamp(ts),
                });
            }
            indices.push(index);
        }
        Ok(indices)
    }
}

/// Independent labelers, each mapping stream names to their sorted anomaly
/// timestamps.
#[derive(Debug, Clone, Default)]
pub struct LabelerSet {
    labelers: BTreeMap<String, BTreeMap<String, Vec<Timestamp>>>,
}

impl LabelerSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(
        &mut self,
        labeler: impl Into<String>,
        stream: impl Into<String>,
        timestamps: Vec<Timestamp>,
    ) {
        let mut timestamps = timestamps;
        timestamps.sort();
        timestamps.dedup();
        self.labelers
            .entry(labeler.into())
            .or_default()
            .insert(stream.into(), timestamps);
    }

    pub fn len(&self) -> usize {
        self.labelers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labelers.is_empty()
    }

    pub fn stream_names(&self) -> BTreeSet<String> {
        self.labelers
            .values()
            .flat_map(|m| m.keys().cloned())
            .collect()
    }

    fn marks_for(&self, stream: &str) -> Vec<(usize, &[Timestamp])> {
        self.labelers
            .values()
            .enumerate()
            .filter_map(|(id, m)| m.get(stream).map(|ts| (id, ts.as_slice())))
            .collect()
    }
}

/// Combine independent labelers into ground-truth labels for every stream
/// they cover.
///
/// All marks for a stream are swept in record order. A mark joins the open
/// cluster when it lies within `tolerance_records` of the cluster's running
/// centroid and its labeler is not yet represented there; a repeated mark by
/// the same labeler always opens a new cluster, so a single labeler passes
/// through unchanged. A cluster becomes a label when the fraction of
/// distinct labelers represented reaches `agreement_fraction`; the label is
/// the cluster's median record index, rounded to the nearest record.
pub fn combine_labels(
    streams: &[DataStream],
    labelers: &LabelerSet,
    agreement_fraction: f64,
    tolerance_records: usize,
) -> Result<BTreeMap<String, GroundTruthLabels>> {
    if labelers.is_empty() {
        return Err(Error::EmptyLabelerSet);
    }
    if !(agreement_fraction > 0.0 && agreement_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "agreement fraction must be in (0, 1], got {agreement_fraction}"
        )));
    }

    let mut out = BTreeMap::new();
    for name in labelers.stream_names() {
        let stream = streams
            .iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::MissingFile(name.clone()))?;
        let marks = labelers.marks_for(&name);
        let indices = combine_stream_marks(
            stream,
            &marks,
            labelers.len(),
            agreement_fraction,
            tolerance_records,
        )?;

        let labels = GroundTruthLabels::from_timestamps(
            indices
                .iter()
                .map(|&i| stream.records()[i].timestamp)
                .collect(),
        );
        // The combined output must itself be a valid label set.
        labels.record_indices(stream)?;
        out.insert(name, labels);
    }
    Ok(out)
}

fn combine_stream_marks(
    stream: &DataStream,
    marks: &[(usize, &[Timestamp])],
    n_labelers: usize,
    agreement_fraction: f64,
    tolerance_records: usize,
) -> Result<Vec<usize>> {
    let mut points: Vec<(usize, usize)> = Vec::new(); // (record index, labeler id)
    for (labeler, timestamps) in marks {
        for ts in *timestamps {
            let index = stream
                .index_of_timestamp(ts)
                .ok_or_else(|| Error::LabelNotFound {
                    stream: stream.name().to_owned(),
                    timestamp: format_timestamp(ts),
                })?;
            points.push((index, *labeler));
        }
    }
    points.sort();

    let mut emitted = Vec::new();
    let mut cluster: Vec<(usize, usize)> = Vec::new();
    let close = |cluster: &mut Vec<(usize, usize)>, emitted: &mut Vec<usize>| {
        if cluster.is_empty() {
            return;
        }
        let distinct: BTreeSet<usize> = cluster.iter().map(|&(_, l)| l).collect();
        if distinct.len() as f64 / n_labelers as f64 >= agreement_fraction {
            let mut indices: Vec<usize> = cluster.iter().map(|&(i, _)| i).collect();
            indices.sort_unstable();
            let median = if indices.len() % 2 == 1 {
                indices[indices.len() / 2] as f64
            } else {
                (indices[indices.len() / 2 - 1] + indices[indices.len() / 2]) as f64 / 2.0
            };
            emitted.push(median.round() as usize);
        }
        cluster.clear();
    };

    for (index, labeler) in points {
        let centroid = if cluster.is_empty() {
            None
        } else {
            Some(cluster.iter().map(|&(i, _)| i as f64).sum::<f64>() / cluster.len() as f64)
        };
        let joins = match centroid {
            Some(c) => {
                index as f64 - c <= tolerance_records as f64
                    && !cluster.iter().any(|&(_, l)| l == labeler)
            }
            None => false,
        };
        if joins {
            cluster.push((index, labeler));
        } else {
            close(&mut cluster, &mut emitted);
            cluster.push((index, labeler));
        }
    }
    close(&mut cluster, &mut emitted);

    emitted.sort_unstable();
    emitted.dedup();
    Ok(emitted)
}

/// Write a combined-labels map as JSON: corpus-relative path to an array of
/// timestamp strings.
pub fn write_labels_file<W: Write>(
    labels: &BTreeMap<String, GroundTruthLabels>,
    writer: W,
) -> Result<()> {
    let map: BTreeMap<&str, Vec<String>> = labels
        .iter()
        .map(|(name, l)| {
            (
                name.as_str(),
                l.timestamps().iter().map(format_timestamp).collect(),
            )
        })
        .collect();
    serde_json::to_writer_pretty(writer, &map).map_err(|source| Error::Json {
        path: "labels".into(),
        source,
    })
}

/// Parse a combined-labels JSON file.
pub fn load_labels_file<R: Read>(
    reader: R,
    path: &Path,
) -> Result<BTreeMap<String, GroundTruthLabels>> {
    let raw: BTreeMap<String, Vec<String>> =
        serde_json::from_reader(reader).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
    let mut out = BTreeMap::new();
    for (name, timestamps) in raw {
        let mut parsed = Vec::with_capacity(timestamps.len());
        for ts in &timestamps {
            parsed.push(parse_timestamp(ts).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "{}: unparseable label timestamp `{ts}` for {name}",
                    path.display()
                ))
            })?);
        }
        out.insert(name, GroundTruthLabels::from_timestamps(parsed));
    }
    Ok(out)
}

/// Parse a raw multi-labeler JSON file: labeler name to (path to array of
/// timestamp strings).
pub fn load_labeler_set<R: Read>(reader: R, path: &Path) -> Result<LabelerSet> {
    let raw: BTreeMap<String, BTreeMap<String, Vec<String>>> = serde_json::from_reader(reader)
        .map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
    let mut set = LabelerSet::new();
    for (labeler, by_stream) in raw {
        for (stream, timestamps) in by_stream {
            let mut parsed = Vec::with_capacity(timestamps.len());
            for ts in &timestamps {
                parsed.push(parse_timestamp(ts).ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "{}: unparseable timestamp `{ts}` for labeler {labeler}, stream {stream}",
                        path.display()
                    ))
                })?);
            }
            set.insert(labeler.clone(), stream, parsed);
        }
    }
    if set.is_empty() {
        return Err(Error::EmptyLabelerSet);
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::stream::parse_stream_reader;

    fn stream_of(n: usize) -> DataStream {
        let mut body = String::from("timestamp,value\n");
        let start = parse_timestamp("2015-01-01 00:00:00").unwrap();
        for i in 0..n as i64 {
            let ts = start + chrono::Duration::seconds(300 * i);
            body.push_str(&format!("{},{}\n", format_timestamp(&ts), i));
        }
        parse_stream_reader(body.as_bytes(), "test.csv".into(), None).unwrap()
    }

    fn ts_at(stream: &DataStream, i: usize) -> Timestamp {
        stream.records()[i].timestamp
    }

    #[test]
    fn single_labeler_is_identity() {
        let stream = stream_of(1000);
        let marks = vec![
            ts_at(&stream, 200),
            ts_at(&stream, 203),
            ts_at(&stream, 600),
        ];
        let mut set = LabelerSet::new();
        set.insert("a", "test.csv", marks.clone());
        let combined = combine_labels(std::slice::from_ref(&stream), &set, 1.0, 50).unwrap();
        assert_eq!(combined["test.csv"].timestamps(), marks.as_slice());
    }

    #[test]
    fn three_labelers_cluster_to_median() {
        let stream = stream_of(1000);
        let mut set = LabelerSet::new();
        set.insert("a", "test.csv", vec![ts_at(&stream, 300)]);
        set.insert("b", "test.csv", vec![ts_at(&stream, 301)]);
        set.insert("c", "test.csv", vec![ts_at(&stream, 302)]);
        let combined = combine_labels(std::slice::from_ref(&stream), &set, 0.5, 5).unwrap();
        assert_eq!(combined["test.csv"].timestamps(), &[ts_at(&stream, 301)]);
    }

    #[test]
    fn minority_mark_is_dropped() {
        let stream = stream_of(1000);
        let mut set = LabelerSet::new();
        set.insert(
            "a",
            "test.csv",
            vec![ts_at(&stream, 300), ts_at(&stream, 500)],
        );
        set.insert("b", "test.csv", vec![ts_at(&stream, 300)]);
        set.insert("c", "test.csv", vec![ts_at(&stream, 301)]);
        let combined = combine_labels(std::slice::from_ref(&stream), &set, 0.5, 5).unwrap();
        // Record 500 has 1/3 agreement, below 0.5.
        assert_eq!(combined["test.csv"].timestamps(), &[ts_at(&stream, 300)]);
    }

    #[test]
    fn empty_labeler_set_is_an_error() {
        let stream = stream_of(1000);
        let set = LabelerSet::new();
        assert!(matches!(
            combine_labels(std::slice::from_ref(&stream), &set, 0.5, 5),
            Err(Error::EmptyLabelerSet)
        ));
    }

    #[test]
    fn unknown_mark_timestamp_is_an_error() {
        let stream = stream_of(1000);
        let mut set = LabelerSet::new();
        set.insert(
            "a",
            "test.csv",
            vec![parse_timestamp("2015-01-01 00:00:03").unwrap()],
        );
        assert!(matches!(
            combine_labels(std::slice::from_ref(&stream), &set, 0.5, 5),
            Err(Error::LabelNotFound { .. })
        ));
    }

    #[test]
    fn combined_label_inside_probation_is_rejected() {
        let stream = stream_of(1000);
        let mut set = LabelerSet::new();
        set.insert("a", "test.csv", vec![ts_at(&stream, 10)]);
        assert!(matches!(
            combine_labels(std::slice::from_ref(&stream), &set, 1.0, 5),
            Err(Error::LabelInProbation { .. })
        ));
    }

    #[test]
    fn even_cluster_rounds_to_nearest_record() {
        let stream = stream_of(1000);
        let mut set = LabelerSet::new();
        set.insert("a", "test.csv", vec![ts_at(&stream, 400)]);
        set.insert("b", "test.csv", vec![ts_at(&stream, 401)]);
        let combined = combine_labels(std::slice::from_ref(&stream), &set, 1.0, 5).unwrap();
        // Median 400.5 rounds half away from zero.
        assert_eq!(combined["test.csv"].timestamps(), &[ts_at(&stream, 401)]);
    }

    #[test]
    fn labels_json_round_trip() {
        let stream = stream_of(1000);
        let mut map = BTreeMap::new();
        map.insert(
            "test.csv".to_owned(),
            GroundTruthLabels::from_timestamps(vec![ts_at(&stream, 300), ts_at(&stream, 700)]),
        );
        map.insert("empty.csv".to_owned(), GroundTruthLabels::default());
        let mut buf = Vec::new();
        write_labels_file(&map, &mut buf).unwrap();
        let loaded = load_labels_file(buf.as_slice(), Path::new("labels.json")).unwrap();
        assert_eq!(loaded, map);
    }

    #[test]
    fn labeler_set_json_loads() {
        let json = r#"{
            "alice": {"a.csv": ["2015-01-01 01:00:00"]},
            "bob": {"a.csv": ["2015-01-01 01:05:00"], "b.csv": []}
        }"#;
        let set = load_labeler_set(json.as_bytes(), Path::new("raw.json")).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(
            set.stream_names().into_iter().collect::<Vec<_>>(),
            vec!["a.csv".to_owned(), "b.csv".to_owned()]
        );
    }
}
