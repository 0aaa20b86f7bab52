//! Corpus handling: data streams, ground-truth labels, anomaly windows and
//! synthetic data generation.
//!
//! A corpus is a directory of CSV files (`timestamp,value` per record) plus
//! JSON side files for combined labels and anomaly windows. All window and
//! probation arithmetic is done in record indices; timestamps are treated as
//! opaque ordered keys and only mapped back for serialization, since corpus
//! files have heterogeneous sampling intervals.

mod labels;
mod stream;
mod synthetic;
mod windows;

pub use labels::{
    combine_labels, default_tolerance, load_labeler_set, load_labels_file, write_labels_file,
    GroundTruthLabels, LabelerSet, DEFAULT_AGREEMENT_FRACTION,
};
pub use stream::{
    format_timestamp, parse_stream, parse_stream_reader, parse_timestamp, probation_length,
    write_stream, DataStream, TimeRecord, Timestamp, PROBATION_FRACTION,
};
pub use synthetic::{
    generate_synthetic, generate_synthetic_named, SyntheticKind, SyntheticParams, SHIFT_SIGMAS,
    SPIKE_SIGMAS,
};
pub use windows::{
    load_windows_file, make_windows, make_windows_with, resolve_windows, window_width,
    write_windows_file, AnomalyWindow, WindowConfig, DEFAULT_WINDOW_FRACTION,
};

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

/// In-memory corpus: validated streams keyed by corpus-relative path.
#[derive(Debug, Clone)]
pub struct Corpus {
    streams: Vec<DataStream>,
}

impl Corpus {
    /// Walk `data_dir` for `*.csv` files and parse every one. Stream names
    /// are paths relative to `data_dir`, sorted, with `/` separators.
    pub fn load(data_dir: &Path, probation_cap: Option<usize>) -> Result<Self> {
        let mut rel_paths = Vec::new();
        for entry in walkdir::WalkDir::new(data_dir).sort_by_file_name() {
            let entry = entry.map_err(|e| {
                let path = e.path().map(Path::to_path_buf).unwrap_or_default();
                Error::io(path, e.into())
            })?;
            if entry.file_type().is_file()
                && entry.path().extension().is_some_and(|ext| ext == "csv")
            {
                let rel = entry
                    .path()
                    .strip_prefix(data_dir)
                    .expect("walkdir yields paths under its root")
                    .to_string_lossy()
                    .replace('\\', "/");
                rel_paths.push((rel, entry.path().to_path_buf()));
            }
        }
        rel_paths.sort();
        if rel_paths.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let streams = crate::par::try_map(rel_paths, |(rel, path)| {
            parse_stream(&path, rel, probation_cap)
        })?;
        Ok(Self { streams })
    }

    pub fn from_streams(streams: Vec<DataStream>) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut streams = streams;
        streams.sort_by(|a, b| a.name().cmp(b.name()));
        Ok(Self { streams })
    }

    pub fn streams(&self) -> &[DataStream] {
        &self.streams
    }

    pub fn stream(&self, name: &str) -> Option<&DataStream> {
        self.streams.iter().find(|s| s.name() == name)
    }

    pub fn total_records(&self) -> usize {
        self.streams.iter().map(|s| s.len()).sum()
    }

    /// Build anomaly windows for every stream from a combined labels map.
    /// Streams absent from `labels` get an empty window list (false-positive
    /// trap files).
    pub fn windows_from_labels(
        &self,
        labels: &BTreeMap<String, GroundTruthLabels>,
        config: &WindowConfig,
    ) -> Result<BTreeMap<String, Vec<AnomalyWindow>>> {
        let mut out = BTreeMap::new();
        for stream in &self.streams {
            let windows = match labels.get(stream.name()) {
                Some(l) => make_windows_with(stream, l, config)?,
                None => Vec::new(),
            };
            out.insert(stream.name().to_owned(), windows);
        }
        for name in labels.keys() {
            if !out.contains_key(name) {
                return Err(Error::MissingFile(name.clone()));
            }
        }
        Ok(out)
    }
}
