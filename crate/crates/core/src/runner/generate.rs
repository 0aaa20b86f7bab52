//! Corpus generation from a JSON specification: writes data CSVs, the
//! combined ground-truth labels file, and the derived anomaly-windows file
//! into one output directory.

use crate::corpus::{
    generate_synthetic_named, make_windows_with, write_labels_file, write_stream,
    write_windows_file, AnomalyWindow, DataStream, GroundTruthLabels, SyntheticKind,
    SyntheticParams, WindowConfig, DEFAULT_WINDOW_FRACTION,
};
use crate::detectors::stream_seed;
use crate::error::{Error, Result};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

/// One stream to synthesize.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileSpec {
    /// Relative path of the CSV inside the corpus, e.g. `spikes/s1.csv`.
    pub name: String,
    /// Signal kind: `spike`, `level_shift`, `frequency_change`, `noise_only`.
    pub kind: String,
    pub records: usize,
    /// Record indices of the injected anomalies (empty for clean files).
    #[serde(default)]
    pub anomalies: Vec<usize>,
}

/// Top-level generation spec, parsed from JSON.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    /// Fraction of each file's length shared among its anomaly windows.
    #[serde(default)]
    pub window_fraction: Option<f64>,
    pub files: Vec<FileSpec>,
}

impl GenerateSpec {
    pub fn from_json(text: &str, path: &Path) -> Result<Self> {
        let spec: GenerateSpec = serde_json::from_str(text).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path.to_path_buf(), e))?;
        Self::from_json(&text, path)
    }

    fn validate(&self) -> Result<()> {
        if self.files.is_empty() {
            return Err(Error::InvalidConfig(
                "generation spec lists no files".into(),
            ));
        }
        if let Some(f) = self.window_fraction {
            if !(f.is_finite() && f > 0.0 && f < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "window_fraction must be in (0, 1), got {f}"
                )));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, file) in self.files.iter().enumerate() {
            let context = |message: String| {
                Error::InvalidConfig(format!("files[{i}] (`{}`): {message}", file.name))
            };
            validate_corpus_rel_path(&file.name).map_err(|e| context(e.to_string()))?;
            if !seen.insert(file.name.clone()) {
                return Err(Error::DuplicateFile(file.name.clone()));
            }
            SyntheticKind::from_str(&file.kind).map_err(|e| context(e.to_string()))?;
        }
        Ok(())
    }
}

/// Reject absolute paths, `..` components, and non-CSV names so a spec file
/// can never write outside the output directory.
fn validate_corpus_rel_path(name: &str) -> Result<()> {
    let path = Path::new(name);
    if name.is_empty() || !name.ends_with(".csv") {
        return Err(Error::InvalidConfig("name must end in .csv".into()));
    }
    for component in path.components() {
        match component {
            Component::Normal(_) => {}
            _ => {
                return Err(Error::InvalidConfig(
                    "name must be a relative path without `..`".into(),
                ))
            }
        }
    }
    Ok(())
}

/// Everything `generate_corpus` wrote, for reporting and tests.
#[derive(Debug)]
pub struct GeneratedCorpus {
    pub data_dir: PathBuf,
    pub labels_path: PathBuf,
    pub windows_path: PathBuf,
    pub streams: Vec<String>,
    pub windows: BTreeMap<String, Vec<AnomalyWindow>>,
}

/// Synthesize every file in `spec` under `out_dir/data`, then write
/// `labels.json` and `windows.json` beside it. Each stream is seeded from
/// `seed` and its own name, so adding a file never changes the others.
pub fn generate_corpus(spec: &GenerateSpec, out_dir: &Path, seed: u64) -> Result<GeneratedCorpus> {
    spec.validate()?;
    let fraction = spec.window_fraction.unwrap_or(DEFAULT_WINDOW_FRACTION);
    let window_config = WindowConfig { fraction };
    let params = SyntheticParams::default();

    let jobs: Vec<(usize, FileSpec)> = spec.files.iter().cloned().enumerate().collect();
    let generated: Vec<(DataStream, GroundTruthLabels)> =
        crate::par::try_map(jobs, |(i, file)| {
            let kind = SyntheticKind::from_str(&file.kind)?;
            generate_synthetic_named(
                &file.name,
                kind,
                file.records,
                &file.anomalies,
                stream_seed(seed, &file.name),
                &params,
            )
            .map_err(|e| Error::InvalidConfig(format!("files[{i}] (`{}`): {e}", file.name)))
        })?;

    let data_dir = out_dir.join("data");
    let mut labels = BTreeMap::new();
    let mut windows = BTreeMap::new();
    let mut streams = Vec::new();
    for (stream, truth) in &generated {
        let path = data_dir.join(stream.name());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.to_path_buf(), e))?;
        }
        let file = fs::File::create(&path).map_err(|e| Error::io(path.clone(), e))?;
        write_stream(stream, file)?;
        windows.insert(
            stream.name().to_owned(),
            make_windows_with(stream, truth, &window_config)?,
        );
        labels.insert(stream.name().to_owned(), truth.clone());
        streams.push(stream.name().to_owned());
    }

    let labels_path = out_dir.join("labels.json");
    let file = fs::File::create(&labels_path).map_err(|e| Error::io(labels_path.clone(), e))?;
    write_labels_file(&labels, file)?;

    let windows_path = out_dir.join("windows.json");
    let file = fs::File::create(&windows_path).map_err(|e| Error::io(windows_path.clone(), e))?;
    write_windows_file(&windows, file)?;

    Ok(GeneratedCorpus {
        data_dir,
        labels_path,
        windows_path,
        streams,
        windows,
    })
}
