//! Per-detector run manifest: everything needed to audit or reproduce a
//! detection pass, written as `run_manifest.json` inside the detector's
//! results directory.

use crate::detectors::DetectorConfig;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const MANIFEST_FILE_NAME: &str = "run_manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FileOutcome {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileStatus {
    pub status: FileOutcome,
    pub records: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    /// RFC 3339 UTC wall-clock time at stage completion.
    pub completed_at: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub data_dir: String,
    pub detector: String,
    pub detector_config: DetectorConfig,
    pub seed: u64,
    pub profiles: Vec<String>,
    pub files: BTreeMap<String, FileStatus>,
    pub stages: Vec<StageRecord>,
}

impl RunManifest {
    pub fn new(data_dir: &str, detector: &str, config: &DetectorConfig, seed: u64) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            data_dir: data_dir.to_owned(),
            detector: detector.to_owned(),
            detector_config: config.clone(),
            seed,
            profiles: Vec::new(),
            files: BTreeMap::new(),
            stages: Vec::new(),
        }
    }

    pub fn record_ok(&mut self, stream: &str, records: usize) {
        self.files.insert(
            stream.to_owned(),
            FileStatus {
                status: FileOutcome::Ok,
                records,
                error: None,
            },
        );
    }

    pub fn record_failure(&mut self, stream: &str, records: usize, error: &str) {
        self.files.insert(
            stream.to_owned(),
            FileStatus {
                status: FileOutcome::Failed,
                records,
                error: Some(error.to_owned()),
            },
        );
    }

    pub fn finish_stage(&mut self, stage: &str) {
        self.stages.push(StageRecord {
            stage: stage.to_owned(),
            completed_at: chrono::Utc::now().to_rfc3339(),
        });
    }

    pub fn failed_files(&self) -> Vec<&str> {
        self.files
            .iter()
            .filter(|(_, s)| s.status == FileOutcome::Failed)
            .map(|(name, _)| name.as_str())
            .collect()
    }

    pub fn is_partial(&self) -> bool {
        self.files.values().any(|s| s.status == FileOutcome::Failed)
    }

    pub fn write(&self, detector_results_dir: &Path) -> Result<()> {
        fs::create_dir_all(detector_results_dir)
            .map_err(|e| Error::io(detector_results_dir.to_path_buf(), e))?;
        let path = detector_results_dir.join(MANIFEST_FILE_NAME);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(detector_results_dir: &Path) -> Result<Self> {
        let path = detector_results_dir.join(MANIFEST_FILE_NAME);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(path.clone(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })
    }
}
