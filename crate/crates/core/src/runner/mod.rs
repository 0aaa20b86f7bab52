//! End-to-end pipeline: run detectors over a corpus, persist their score
//! columns, optimize thresholds, score under every profile, and render the
//! scoreboard. A detector failing on one file marks that file failed and
//! the run continues with the rest.

pub mod generate;
pub mod manifest;
pub mod plotdata;
pub mod results;

pub use generate::{generate_corpus, FileSpec, GenerateSpec, GeneratedCorpus};
pub use manifest::{FileOutcome, FileStatus, RunManifest, StageRecord, MANIFEST_FILE_NAME};
pub use plotdata::{write_plot_csv, PLOT_HEADER};
pub use results::{
    load_corpus_results, read_results_csv, read_results_file, results_rel_path, write_results_csv,
    write_results_file,
};

use crate::corpus::{AnomalyWindow, Corpus, DataStream};
use crate::detectors::{build_detector, DetectorConfig, DetectorSpec, StreamMetadata};
use crate::error::{Error, Result};
use crate::optimizer::{
    corpus_raw_at_threshold, optimize_threshold, write_thresholds_file, ScoredStream,
    ThresholdEntry, ThresholdFile, ThresholdResult,
};
use crate::scoring::{
    normalize, null_raw, perfect_raw, score_corpus, write_score_report, write_scoreboard_csv,
    ApplicationProfile, DetectorScores, ScoreReport, WindowSpan,
};
use std::borrow::Cow;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const SCORES_FILE_NAME: &str = "scores.json";
pub const SCOREBOARD_FILE_NAME: &str = "scoreboard.csv";
pub const THRESHOLDS_FILE_NAME: &str = "thresholds.json";

/// Outcome of running one detector over a corpus: score columns for the
/// streams that succeeded, an error message per stream that did not.
#[derive(Debug, Default)]
pub struct DetectionOutcome {
    pub scores_by_file: BTreeMap<String, Vec<f64>>,
    pub failures: BTreeMap<String, String>,
}

impl DetectionOutcome {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

fn window_spans(
    windows_by_file: Option<&BTreeMap<String, Vec<AnomalyWindow>>>,
    stream: &str,
) -> Option<Vec<WindowSpan>> {
    windows_by_file.map(|map| {
        map.get(stream)
            .map(|ws| ws.iter().map(AnomalyWindow::span).collect())
            .unwrap_or_default()
    })
}

/// Run one detector over one stream, strictly record by record. Scores are
/// validated to be finite and within [0, 1] as they arrive.
pub fn detect_stream(
    spec: &DetectorSpec,
    config: &DetectorConfig,
    run_seed: u64,
    stream: &DataStream,
    windows: Option<&[WindowSpan]>,
) -> Result<Vec<f64>> {
    let mut detector = build_detector(spec, stream.name(), run_seed, windows, config)?;
    detector.initialize(&StreamMetadata {
        name: stream.name().to_owned(),
        record_count: stream.len(),
        probation_length: stream.probation_end_index(),
    })?;
    let mut scores = Vec::with_capacity(stream.len());
    for (index, record) in stream.records().iter().enumerate() {
        let value = detector.step(record)?;
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::ScoreOutOfRange { index, value });
        }
        scores.push(value);
    }
    Ok(scores)
}

/// Run one detector over every stream of the corpus. Streams are
/// independent, so per-stream failures are collected rather than aborting
/// the run.
pub fn detect_corpus(
    spec: &DetectorSpec,
    config: &DetectorConfig,
    run_seed: u64,
    corpus: &Corpus,
    windows_by_file: Option<&BTreeMap<String, Vec<AnomalyWindow>>>,
) -> DetectionOutcome {
    let jobs: Vec<&DataStream> = corpus.streams().iter().collect();
    let ran = crate::par::map(jobs, |stream| {
        let spans = window_spans(windows_by_file, stream.name());
        let scores = detect_stream(spec, config, run_seed, stream, spans.as_deref());
        (stream.name().to_owned(), scores)
    });
    let mut outcome = DetectionOutcome::default();
    for (name, scores) in ran {
        match scores {
            Ok(scores) => {
                outcome.scores_by_file.insert(name, scores);
            }
            Err(e) => {
                outcome.failures.insert(name, e.to_string());
            }
        }
    }
    outcome
}

/// Run one detector and persist its results tree plus `run_manifest.json`
/// under `results_root`. Failed files get a manifest entry and no CSV.
#[allow(clippy::too_many_arguments)]
pub fn detect_to_disk(
    spec: &DetectorSpec,
    config: &DetectorConfig,
    run_seed: u64,
    corpus: &Corpus,
    windows_by_file: Option<&BTreeMap<String, Vec<AnomalyWindow>>>,
    results_root: &Path,
    data_dir_label: &str,
    profile_names: &[String],
) -> Result<(DetectionOutcome, RunManifest)> {
    let outcome = detect_corpus(spec, config, run_seed, corpus, windows_by_file);
    let mut manifest = RunManifest::new(data_dir_label, &spec.to_string(), config, run_seed);
    manifest.profiles = profile_names.to_vec();
    for stream in corpus.streams() {
        match outcome.scores_by_file.get(stream.name()) {
            Some(scores) => {
                write_results_file(results_root, &spec.dir_name(), stream, scores)?;
                manifest.record_ok(stream.name(), stream.len());
            }
            None => {
                let message = outcome
                    .failures
                    .get(stream.name())
                    .map(String::as_str)
                    .unwrap_or("unknown failure");
                manifest.record_failure(stream.name(), stream.len(), message);
            }
        }
    }
    manifest.finish_stage("detect");
    manifest.write(&results_root.join(spec.dir_name()))?;
    Ok((outcome, manifest))
}

/// What a full benchmark run should do.
#[derive(Debug, Clone)]
pub struct PipelineOptions {
    pub detectors: Vec<DetectorSpec>,
    pub config: DetectorConfig,
    pub seed: u64,
    pub profiles: Vec<ApplicationProfile>,
    /// Score at this fixed threshold instead of optimizing per profile.
    pub fixed_threshold: Option<f64>,
    /// Reuse score columns already on disk instead of running detectors.
    pub from_results: bool,
    /// Recorded in each run manifest.
    pub data_dir_label: String,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub report: ScoreReport,
    pub thresholds: ThresholdFile,
    /// Failed files per detector (display name). Empty when every file ran.
    pub failures: BTreeMap<String, BTreeMap<String, String>>,
    /// Rendered text scoreboard: one row per detector, one column per
    /// profile, partial runs flagged.
    pub scoreboard: String,
}

impl PipelineOutput {
    pub fn is_partial(&self) -> bool {
        self.failures.values().any(|f| !f.is_empty())
    }
}

/// Detect (or reload), optimize, score and normalize every detector, then
/// write the run artifacts (`scores.json`, `scoreboard.csv`,
/// `thresholds.json`) at the results root.
pub fn run_pipeline(
    corpus: &Corpus,
    windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
    results_root: &Path,
    options: &PipelineOptions,
) -> Result<PipelineOutput> {
    if options.detectors.is_empty() {
        return Err(Error::InvalidConfig("no detectors requested".into()));
    }
    let profile_names: Vec<String> = options
        .profiles
        .iter()
        .map(|p| p.name().to_owned())
        .collect();

    let mut report = ScoreReport::default();
    let mut thresholds = ThresholdFile::new();
    let mut failures = BTreeMap::new();

    for spec in &options.detectors {
        let display = spec.to_string();
        let (scores_by_file, detector_failures) = if options.from_results {
            load_results_outcome(results_root, &spec.dir_name(), corpus)
        } else {
            let (outcome, _) = detect_to_disk(
                spec,
                &options.config,
                options.seed,
                corpus,
                Some(windows_by_file),
                results_root,
                &options.data_dir_label,
                &profile_names,
            )?;
            (outcome.scores_by_file, outcome.failures)
        };
        failures.insert(display.clone(), detector_failures);

        if scores_by_file.is_empty() {
            continue; // every file failed; nothing to score
        }

        // Score only the streams that produced results; their windows are
        // the universe for this detector's normalization.
        let complete = scores_by_file.len() == corpus.streams().len();
        let (scored_corpus, scored_windows): (
            Cow<Corpus>,
            Cow<BTreeMap<String, Vec<AnomalyWindow>>>,
        ) = if complete {
            (Cow::Borrowed(corpus), Cow::Borrowed(windows_by_file))
        } else {
            let kept: Vec<DataStream> = corpus
                .streams()
                .iter()
                .filter(|s| scores_by_file.contains_key(s.name()))
                .cloned()
                .collect();
            let windows = windows_by_file
                .iter()
                .filter(|(name, _)| scores_by_file.contains_key(*name))
                .map(|(name, ws)| (name.clone(), ws.clone()))
                .collect();
            (Cow::Owned(Corpus::from_streams(kept)?), Cow::Owned(windows))
        };

        let streams = ScoredStream::collect(&scored_corpus, &scored_windows, &scores_by_file)?;
        for profile in &options.profiles {
            let result = match options.fixed_threshold {
                Some(threshold) => {
                    let raw = corpus_raw_at_threshold(&streams, threshold, profile)?;
                    let perfect = perfect_raw(&scored_windows, profile);
                    let null = null_raw(&scored_windows, profile);
                    ThresholdResult {
                        threshold,
                        raw,
                        normalized: normalize(raw, perfect, null)?,
                        candidates_evaluated: 1,
                    }
                }
                None => optimize_threshold(&streams, profile)?,
            };
            let detections: BTreeMap<String, Vec<usize>> = streams
                .iter()
                .map(|s| (s.name().to_owned(), s.detections_at(result.threshold)))
                .collect();
            let corpus_score = score_corpus(&scored_corpus, &scored_windows, &detections, profile)?;
            report.insert(&display, &corpus_score);
            thresholds
                .entry(display.clone())
                .or_default()
                .insert(profile.name().to_owned(), ThresholdEntry::from(result));
        }
    }

    write_run_artifacts(results_root, &report, &thresholds)?;
    let detector_names: Vec<String> = options.detectors.iter().map(|d| d.to_string()).collect();
    let scoreboard = render_scoreboard(
        &report,
        &detector_names,
        &profile_names,
        &failures,
        corpus.streams().len(),
    );
    Ok(PipelineOutput {
        report,
        thresholds,
        failures,
        scoreboard,
    })
}

fn load_results_outcome(
    results_root: &Path,
    detector_dir: &str,
    corpus: &Corpus,
) -> (BTreeMap<String, Vec<f64>>, BTreeMap<String, String>) {
    let jobs: Vec<&DataStream> = corpus.streams().iter().collect();
    let loaded = crate::par::map(jobs, |stream| {
        let scores = read_results_file(results_root, detector_dir, stream);
        (stream.name().to_owned(), scores)
    });
    let mut scores_by_file = BTreeMap::new();
    let mut failures = BTreeMap::new();
    for (name, result) in loaded {
        match result {
            Ok(scores) => {
                scores_by_file.insert(name, scores);
            }
            Err(e) => {
                failures.insert(name, e.to_string());
            }
        }
    }
    (scores_by_file, failures)
}

/// Persist `scores.json`, `scoreboard.csv` and `thresholds.json`.
pub fn write_run_artifacts(
    results_root: &Path,
    report: &ScoreReport,
    thresholds: &ThresholdFile,
) -> Result<()> {
    fs::create_dir_all(results_root).map_err(|e| Error::io(results_root.to_path_buf(), e))?;
    let path = results_root.join(SCORES_FILE_NAME);
    let file = fs::File::create(&path).map_err(|e| Error::io(path, e))?;
    write_score_report(report, file)?;

    let path = results_root.join(SCOREBOARD_FILE_NAME);
    let file = fs::File::create(&path).map_err(|e| Error::io(path, e))?;
    write_scoreboard_csv(report, file)?;

    if !thresholds.is_empty() {
        let path = results_root.join(THRESHOLDS_FILE_NAME);
        let file = fs::File::create(&path).map_err(|e| Error::io(path, e))?;
        write_thresholds_file(thresholds, file)?;
    }
    Ok(())
}

/// Text scoreboard: detectors as rows, profiles as columns, normalized
/// scores to one decimal. Partial runs are flagged below the table.
pub fn render_scoreboard(
    report: &ScoreReport,
    detectors: &[String],
    profiles: &[String],
    failures: &BTreeMap<String, BTreeMap<String, String>>,
    total_files: usize,
) -> String {
    let name_width = detectors
        .iter()
        .map(String::len)
        .chain(std::iter::once("detector".len()))
        .max()
        .unwrap_or(8);
    let mut out = String::new();
    out.push_str(&format!("{:<name_width$}", "detector"));
    for profile in profiles {
        out.push_str(&format!(
            "  {:>width$}",
            profile,
            width = profile.len().max(6)
        ));
    }
    out.push('\n');
    for detector in detectors {
        out.push_str(&format!("{detector:<name_width$}"));
        for profile in profiles {
            let cell = match report.get(detector, profile) {
                Some(s) => format!("{:.1}", s.normalized_score),
                None => "-".to_owned(),
            };
            out.push_str(&format!("  {:>width$}", cell, width = profile.len().max(6)));
        }
        out.push('\n');
    }
    let mut partial: Vec<&String> = failures
        .iter()
        .filter(|(_, f)| !f.is_empty())
        .map(|(d, _)| d)
        .collect();
    partial.sort();
    for detector in partial {
        out.push_str(&format!(
            "PARTIAL: {detector} failed on {} of {total_files} files (see run_manifest.json)\n",
            failures[detector].len(),
        ));
    }
    out
}

/// Recompute one detector's normalized scores from its persisted raw
/// scores, the window set it was scored against, and the profile
/// definitions. Refreshes the stored baselines too.
pub fn renormalize_detector(
    detector: &str,
    scores: &mut DetectorScores,
    windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
    profiles: &[ApplicationProfile],
) -> Result<()> {
    for (profile_name, summary) in scores.iter_mut() {
        let profile = profiles
            .iter()
            .find(|p| p.name() == profile_name)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "scores for `{detector}` reference unknown profile `{profile_name}`"
                ))
            })?;
        let perfect = perfect_raw(windows_by_file, profile);
        let null = null_raw(windows_by_file, profile);
        summary.perfect_score = perfect;
        summary.null_score = null;
        summary.normalized_score = normalize(summary.raw_score, perfect, null)?;
    }
    Ok(())
}

/// Write plot tables for one detector's persisted results: one CSV per
/// stream under `<results>/<detector>/plotdata/`, mirroring the corpus
/// layout.
pub fn write_corpus_plotdata(
    corpus: &Corpus,
    windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
    results_root: &Path,
    spec: &DetectorSpec,
    threshold: f64,
    profile: &ApplicationProfile,
) -> Result<Vec<std::path::PathBuf>> {
    let dir = spec.dir_name();
    let mut written = Vec::new();
    for stream in corpus.streams() {
        let scores = read_results_file(results_root, &dir, stream)?;
        let spans = window_spans(Some(windows_by_file), stream.name()).unwrap_or_default();
        let path = results_root.join(&dir).join("plotdata").join(stream.name());
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent.to_path_buf(), e))?;
        }
        let file = fs::File::create(&path).map_err(|e| Error::io(path.clone(), e))?;
        write_plot_csv(stream, &scores, &spans, threshold, profile, file)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SyntheticKind};
    use std::str::FromStr;

    fn spike_corpus() -> (Corpus, BTreeMap<String, Vec<AnomalyWindow>>) {
        let mut streams = Vec::new();
        let mut windows = BTreeMap::new();
        for seed in 0..3u64 {
            let (stream, labels) =
                generate_synthetic(SyntheticKind::Spike, 400, &[200, 320], seed).unwrap();
            let ws = crate::corpus::make_windows(&stream, &labels).unwrap();
            windows.insert(stream.name().to_owned(), ws);
            streams.push(stream);
        }
        (Corpus::from_streams(streams).unwrap(), windows)
    }

    fn options(detectors: &[&str]) -> PipelineOptions {
        PipelineOptions {
            detectors: detectors
                .iter()
                .map(|d| DetectorSpec::from_str(d).unwrap())
                .collect(),
            config: DetectorConfig::default(),
            seed: 42,
            profiles: ApplicationProfile::defaults(),
            fixed_threshold: None,
            from_results: false,
            data_dir_label: "test-corpus".into(),
        }
    }

    #[test]
    fn pipeline_scores_oracle_and_null_at_their_anchors() {
        let (corpus, windows) = spike_corpus();
        let dir = tempfile::tempdir().unwrap();
        let out =
            run_pipeline(&corpus, &windows, dir.path(), &options(&["oracle", "null"])).unwrap();
        assert!(!out.is_partial());
        for profile in ["standard", "reward_low_fp", "reward_low_fn"] {
            let oracle = out.report.get("oracle", profile).unwrap();
            assert!((oracle.normalized_score - 100.0).abs() < 1e-9, "{profile}");
            let null = out.report.get("null", profile).unwrap();
            assert!(null.normalized_score.abs() < 1e-9, "{profile}");
        }
        assert!(dir.path().join("scores.json").is_file());
        assert!(dir.path().join("scoreboard.csv").is_file());
        assert!(dir.path().join("thresholds.json").is_file());
        assert!(dir.path().join("oracle/oracle_spike_0.csv").is_file());
        assert!(dir.path().join("oracle/run_manifest.json").is_file());
        assert!(out.scoreboard.contains("oracle"));
        assert!(out.scoreboard.contains("100.0"));
    }

    #[test]
    fn rerun_from_results_reproduces_the_report() {
        let (corpus, windows) = spike_corpus();
        let dir = tempfile::tempdir().unwrap();
        let first = run_pipeline(
            &corpus,
            &windows,
            dir.path(),
            &options(&["windowed_gaussian"]),
        )
        .unwrap();
        let mut opts = options(&["windowed_gaussian"]);
        opts.from_results = true;
        let second = run_pipeline(&corpus, &windows, dir.path(), &opts).unwrap();
        for profile in ["standard", "reward_low_fp", "reward_low_fn"] {
            let a = first.report.get("windowed_gaussian", profile).unwrap();
            let b = second.report.get("windowed_gaussian", profile).unwrap();
            assert_eq!(a.raw_score, b.raw_score, "{profile}");
            assert_eq!(a.normalized_score, b.normalized_score, "{profile}");
        }
    }

    #[test]
    fn missing_results_mark_files_failed_but_the_run_continues() {
        let (corpus, windows) = spike_corpus();
        let dir = tempfile::tempdir().unwrap();
        run_pipeline(&corpus, &windows, dir.path(), &options(&["null"])).unwrap();
        // Remove one stream's results, then rescore from disk.
        fs::remove_file(dir.path().join("null/null_spike_1.csv")).unwrap();
        let mut opts = options(&["null"]);
        opts.from_results = true;
        let out = run_pipeline(&corpus, &windows, dir.path(), &opts).unwrap();
        assert!(out.is_partial());
        assert_eq!(out.failures["null"].len(), 1);
        assert!(out.failures["null"].contains_key("spike_1.csv"));
        // Null still scores 0 on the two remaining files.
        let s = out.report.get("null", "standard").unwrap();
        assert!(s.normalized_score.abs() < 1e-9);
        assert_eq!(s.fn_, 4, "two windows in each of the two surviving files");
        assert!(out
            .scoreboard
            .contains("PARTIAL: null failed on 1 of 3 files"));
    }

    #[test]
    fn fixed_threshold_skips_optimization() {
        let (corpus, windows) = spike_corpus();
        let dir = tempfile::tempdir().unwrap();
        let mut opts = options(&["oracle"]);
        opts.fixed_threshold = Some(0.5);
        let out = run_pipeline(&corpus, &windows, dir.path(), &opts).unwrap();
        let entry = &out.thresholds["oracle"]["standard"];
        assert_eq!(entry.threshold, 0.5);
        let s = out.report.get("oracle", "standard").unwrap();
        assert!((s.normalized_score - 100.0).abs() < 1e-9);
    }

    #[test]
    fn scoreboard_renders_rows_by_detector_and_columns_by_profile() {
        let (corpus, windows) = spike_corpus();
        let dir = tempfile::tempdir().unwrap();
        let out =
            run_pipeline(&corpus, &windows, dir.path(), &options(&["null", "oracle"])).unwrap();
        let lines: Vec<&str> = out.scoreboard.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("detector"));
        assert!(lines[0].contains("standard"));
        assert!(lines[0].contains("reward_low_fp"));
        assert!(lines[0].contains("reward_low_fn"));
        // Rows follow the requested detector order.
        assert!(lines[1].starts_with("null"));
        assert!(lines[2].starts_with("oracle"));
        assert!(lines[1].contains("0.0"));
        assert!(lines[2].contains("100.0"));
    }

    #[test]
    fn renormalize_recovers_normalized_from_raw() {
        let (corpus, windows) = spike_corpus();
        let dir = tempfile::tempdir().unwrap();
        let out = run_pipeline(
            &corpus,
            &windows,
            dir.path(),
            &options(&["windowed_gaussian"]),
        )
        .unwrap();
        let mut report = out.report.clone();
        // Corrupt the normalized scores, then rebuild them from raw.
        for scores in report.0.values_mut() {
            for summary in scores.values_mut() {
                summary.normalized_score = f64::NAN;
            }
        }
        for (detector, scores) in report.0.iter_mut() {
            renormalize_detector(detector, scores, &windows, &ApplicationProfile::defaults())
                .unwrap();
        }
        for profile in ["standard", "reward_low_fp", "reward_low_fn"] {
            let original = out.report.get("windowed_gaussian", profile).unwrap();
            let rebuilt = report.get("windowed_gaussian", profile).unwrap();
            assert!(
                (original.normalized_score - rebuilt.normalized_score).abs() < 1e-9,
                "{profile}"
            );
        }
    }
}
