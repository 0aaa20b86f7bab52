//! Score report serialization: JSON for machines, flat CSV for scanning.

use super::CorpusScore;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Corpus-level outcome of one detector under one profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileScoreSummary {
    pub raw_score: f64,
    pub normalized_score: f64,
    pub null_score: f64,
    pub perfect_score: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl From<&CorpusScore> for ProfileScoreSummary {
    fn from(score: &CorpusScore) -> Self {
        Self {
            raw_score: score.raw,
            normalized_score: score.normalized,
            null_score: score.null_raw,
            perfect_score: score.perfect_raw,
            tp: score.true_positives,
            fp: score.false_positives,
            fn_: score.false_negatives,
            tn: score.true_negatives,
        }
    }
}

/// Per-profile summaries for one detector, keyed by profile name.
pub type DetectorScores = BTreeMap<String, ProfileScoreSummary>;

/// Full report: detector name -> profile name -> summary.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreReport(pub BTreeMap<String, DetectorScores>);

impl ScoreReport {
    pub fn insert(&mut self, detector: &str, score: &CorpusScore) {
        self.0
            .entry(detector.to_owned())
            .or_default()
            .insert(score.profile.clone(), ProfileScoreSummary::from(score));
    }

    pub fn get(&self, detector: &str, profile: &str) -> Option<&ProfileScoreSummary> {
        self.0.get(detector).and_then(|d| d.get(profile))
    }
}

pub fn write_score_report<W: Write>(report: &ScoreReport, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, report).map_err(|source| Error::Json {
        path: Default::default(),
        source,
    })
}

pub fn load_score_report<R: Read>(reader: R, path: &Path) -> Result<ScoreReport> {
    serde_json::from_reader(reader).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

/// One row per detector and profile: `detector,profile,normalized_score,tp,fp,fn,tn`.
pub fn write_scoreboard_csv<W: Write>(report: &ScoreReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io_err = |e: csv::Error| Error::io(std::path::PathBuf::new(), std::io::Error::other(e));
    w.write_record([
        "detector",
        "profile",
        "normalized_score",
        "tp",
        "fp",
        "fn",
        "tn",
    ])
    .map_err(io_err)?;
    for (detector, profiles) in &report.0 {
        for (profile, s) in profiles {
            w.write_record([
                detector.as_str(),
                profile.as_str(),
                &format!("{:.4}", s.normalized_score),
                &s.tp.to_string(),
                &s.fp.to_string(),
                &s.fn_.to_string(),
                &s.tn.to_string(),
            ])
            .map_err(io_err)?;
        }
    }
    w.flush()
        .map_err(|e| Error::io(std::path::PathBuf::new(), e))?;
    Ok(())
}
