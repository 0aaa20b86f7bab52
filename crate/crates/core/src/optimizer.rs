//! Detection-threshold optimization.
//!
//! A detector emits a score column per stream; the runner turns scores into
//! detections by thresholding. Because the corpus score only changes when
//! the threshold crosses one of the emitted score values, the exact optimum
//! over all real thresholds is found by evaluating the distinct score
//! values plus one sentinel above the valid range (detect nothing).
//!
//! Evaluating every candidate from scratch is quadratic, so the sweep walks
//! candidates in descending order and applies per-record deltas: activating
//! a record either claims its window (or improves the window's earliest
//! detection) or adds a false-positive penalty. Floating-point drift from
//! the running total is removed at the end by re-scoring the few candidates
//! near the incremental maximum through the reference scoring path, which
//! keeps the result bit-identical to brute force.

use crate::corpus::{AnomalyWindow, Corpus};
use crate::error::{Error, Result};
use crate::scoring::{
    fp_position_weight, normalize, position_weight, score_file, ApplicationProfile, WindowSpan,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Candidate threshold just above the valid score range: detects nothing.
pub const SENTINEL_THRESHOLD: f64 = 1.1;

/// Incremental and exact raw totals may differ by accumulated rounding;
/// candidates within this slack of the incremental maximum are re-scored
/// exactly before the winner is chosen.
const REEVALUATION_SLACK: f64 = 1e-6;

/// One stream's score column with its scoring context.
#[derive(Debug, Clone)]
pub struct ScoredStream {
    name: String,
    scores: Vec<f64>,
    windows: Vec<WindowSpan>,
    probation_end: usize,
}

impl ScoredStream {
    /// Validates that every score is finite and in [0, 1].
    pub fn new(
        name: impl Into<String>,
        scores: Vec<f64>,
        windows: Vec<WindowSpan>,
        probation_end: usize,
    ) -> Result<Self> {
        for (index, &value) in scores.iter().enumerate() {
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(Error::ScoreOutOfRange { index, value });
            }
        }
        Ok(Self {
            name: name.into(),
            scores,
            windows,
            probation_end,
        })
    }

    /// Pair a corpus with per-stream score columns and window sets. Both
    /// maps must cover exactly the corpus streams (windows may omit
    /// streams that have none).
    pub fn collect(
        corpus: &Corpus,
        windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
        scores_by_file: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Vec<Self>> {
        for name in scores_by_file.keys() {
            if corpus.stream(name).is_none() {
                return Err(Error::MissingFile(format!(
                    "scores reference unknown stream `{name}`"
                )));
            }
        }
        corpus
            .streams()
            .iter()
            .map(|stream| {
                let scores = scores_by_file.get(stream.name()).ok_or_else(|| {
                    Error::MissingFile(format!("no scores for stream `{}`", stream.name()))
                })?;
                if scores.len() != stream.len() {
                    return Err(Error::InvalidConfig(format!(
                        "stream `{}` has {} records but {} scores",
                        stream.name(),
                        stream.len(),
                        scores.len()
                    )));
                }
                let spans = windows_by_file
                    .get(stream.name())
                    .map(|ws| ws.iter().map(AnomalyWindow::span).collect())
                    .unwrap_or_default();
                Self::new(
                    stream.name(),
                    scores.clone(),
                    spans,
                    stream.probation_end_index(),
                )
            })
            .collect()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Post-probation indices whose score is at or above `threshold`.
    /// Scores were validated at construction, so no range check here.
    pub fn detections_at(&self, threshold: f64) -> Vec<usize> {
        (self.probation_end..self.scores.len())
            .filter(|&i| self.scores[i] >= threshold)
            .collect()
    }
}

/// Turn a raw score column into detection indices: every post-probation
/// record whose score is at or above `threshold`. Probationary records
/// never produce detections. Scores must be finite and in [0, 1].
pub fn apply_threshold(scores: &[f64], threshold: f64, probation_end: usize) -> Result<Vec<usize>> {
    for (index, &value) in scores.iter().enumerate() {
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(Error::ScoreOutOfRange { index, value });
        }
    }
    Ok((probation_end.min(scores.len())..scores.len())
        .filter(|&i| scores[i] >= threshold)
        .collect())
}

/// Outcome of a threshold search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdResult {
    pub threshold: f64,
    /// Exact raw corpus score at `threshold`.
    pub raw: f64,
    /// Normalized corpus score at `threshold`.
    pub normalized: f64,
    /// Distinct candidate thresholds considered.
    pub candidates_evaluated: usize,
}

/// Raw corpus score of thresholded detections, via the reference per-file
/// scoring path.
pub fn corpus_raw_at_threshold(
    streams: &[ScoredStream],
    threshold: f64,
    profile: &ApplicationProfile,
) -> Result<f64> {
    let scores = crate::par::try_map(streams.iter().collect::<Vec<_>>(), |s| {
        let detections = s.detections_at(threshold);
        score_file(
            &s.name,
            &detections,
            &s.windows,
            s.probation_end,
            s.scores.len(),
            profile,
        )
        .map(|f| f.raw)
    })?;
    Ok(scores.iter().sum())
}

fn perfect_and_null(streams: &[ScoredStream], profile: &ApplicationProfile) -> (f64, f64) {
    let mut perfect = 0.0;
    let mut count = 0usize;
    for s in streams {
        for w in &s.windows {
            perfect += profile.tp_weight() * position_weight(w.begin, *w);
            count += 1;
        }
    }
    (perfect, -profile.fn_weight() * count as f64)
}

/// What activating one record does to the running corpus score. The sigmoid
/// position weights are fixed by the window layout, so they are computed
/// once up front.
#[derive(Debug, Clone, Copy)]
enum RecordKind {
    Probation,
    /// Inside the window with this global id.
    InWindow {
        window: u32,
        sigma: f64,
    },
    /// Outside every window; sigma is relative to the closest preceding
    /// window or the flat worst case.
    Outside {
        sigma: f64,
    },
}

fn record_kinds(stream: &ScoredStream, first_window_id: u32) -> Vec<RecordKind> {
    let n = stream.scores.len();
    let mut kinds = Vec::with_capacity(n);
    for index in 0..n {
        if index < stream.probation_end {
            kinds.push(RecordKind::Probation);
            continue;
        }
        let candidate = stream
            .windows
            .partition_point(|w| w.begin <= index)
            .checked_sub(1);
        match candidate {
            Some(wi) if stream.windows[wi].contains(index) => kinds.push(RecordKind::InWindow {
                window: first_window_id + wi as u32,
                sigma: position_weight(index, stream.windows[wi]),
            }),
            _ => kinds.push(RecordKind::Outside {
                sigma: fp_position_weight(index, candidate.map(|wi| stream.windows[wi])),
            }),
        }
    }
    kinds
}

/// Find the threshold maximizing the raw corpus score. Exact: the winner is
/// re-scored through the reference path, and ties are broken toward the
/// largest threshold. Returns an error if the corpus has no windows at all
/// (the normalized score would be undefined).
pub fn optimize_threshold(
    streams: &[ScoredStream],
    profile: &ApplicationProfile,
) -> Result<ThresholdResult> {
    if streams.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (perfect, null) = perfect_and_null(streams, profile);
    // Fails fast when normalization is impossible (no windows anywhere).
    normalize(null, perfect, null)?;

    // Precompute activation effects, assigning global window ids.
    let mut next_window_id = 0u32;
    let mut events: Vec<(f64, u32, RecordKind)> = Vec::new();
    for stream in streams {
        let kinds = record_kinds(stream, next_window_id);
        next_window_id += stream.windows.len() as u32;
        for (index, kind) in kinds.into_iter().enumerate() {
            events.push((stream.scores[index], index as u32, kind));
        }
    }
    events.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));

    // Earliest active record per window: (record index, its sigma).
    let mut claimed: Vec<Option<(u32, f64)>> = vec![None; next_window_id as usize];
    let mut raw = null;
    let mut snapshots: Vec<(f64, f64)> = vec![(SENTINEL_THRESHOLD, raw)];
    let mut i = 0;
    while i < events.len() {
        let value = events[i].0;
        while i < events.len() && events[i].0 == value {
            let (_, index, kind) = events[i];
            match kind {
                RecordKind::Probation => {}
                RecordKind::Outside { sigma } => raw += profile.fp_weight() * sigma,
                RecordKind::InWindow { window, sigma } => {
                    let slot = &mut claimed[window as usize];
                    match *slot {
                        None => {
                            raw += profile.tp_weight() * sigma + profile.fn_weight();
                            *slot = Some((index, sigma));
                        }
                        Some((earliest, old_sigma)) if index < earliest => {
                            raw += profile.tp_weight() * (sigma - old_sigma);
                            *slot = Some((index, sigma));
                        }
                        Some(_) => {}
                    }
                }
            }
            i += 1;
        }
        snapshots.push((value, raw));
    }

    let incremental_max = snapshots
        .iter()
        .map(|&(_, r)| r)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut best: Option<(f64, f64)> = None;
    for &(threshold, approx) in &snapshots {
        if approx < incremental_max - REEVALUATION_SLACK {
            continue;
        }
        let exact = corpus_raw_at_threshold(streams, threshold, profile)?;
        // Snapshots are in descending threshold order, so a strict
        // comparison keeps the largest threshold on ties.
        if best.is_none_or(|(_, b)| exact > b) {
            best = Some((threshold, exact));
        }
    }
    let (threshold, raw) = best.expect("snapshot list is never empty");
    Ok(ThresholdResult {
        threshold,
        raw,
        normalized: normalize(raw, perfect, null)?,
        candidates_evaluated: snapshots.len(),
    })
}

/// Approximate search: repeatedly evaluate a coarse grid and zoom in on the
/// best point. Much cheaper than the exact sweep on huge corpora but only
/// reliable when the score landscape is smooth; the exact sweep is the
/// default everywhere correctness matters.
pub fn refine_threshold(
    streams: &[ScoredStream],
    profile: &ApplicationProfile,
    rounds: usize,
    grid: usize,
) -> Result<ThresholdResult> {
    if streams.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let (perfect, null) = perfect_and_null(streams, profile);
    normalize(null, perfect, null)?;
    let grid = grid.max(3);
    let (mut lo, mut hi) = (0.0f64, SENTINEL_THRESHOLD);
    let mut best = (
        SENTINEL_THRESHOLD,
        corpus_raw_at_threshold(streams, SENTINEL_THRESHOLD, profile)?,
    );
    let mut evaluated = 1;
    for _ in 0..rounds.max(1) {
        let step = (hi - lo) / (grid - 1) as f64;
        let mut round_best = best;
        for g in 0..grid {
            // Walk from the top so ties keep the largest threshold.
            let threshold = hi - g as f64 * step;
            let raw = corpus_raw_at_threshold(streams, threshold, profile)?;
            evaluated += 1;
            if raw > round_best.1 {
                round_best = (threshold, raw);
            }
        }
        best = round_best;
        lo = (best.0 - step).max(0.0);
        hi = (best.0 + step).min(SENTINEL_THRESHOLD);
    }
    Ok(ThresholdResult {
        threshold: best.0,
        raw: best.1,
        normalized: normalize(best.1, perfect, null)?,
        candidates_evaluated: evaluated,
    })
}

/// One optimized operating point: the threshold and the normalized score it
/// achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEntry {
    pub threshold: f64,
    pub score: f64,
}

impl From<ThresholdResult> for ThresholdEntry {
    fn from(r: ThresholdResult) -> Self {
        Self {
            threshold: r.threshold,
            score: r.normalized,
        }
    }
}

/// Optimized thresholds keyed by detector, then profile.
pub type ThresholdFile = BTreeMap<String, BTreeMap<String, ThresholdEntry>>;

pub fn write_thresholds_file<W: Write>(thresholds: &ThresholdFile, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, thresholds).map_err(|source| Error::Json {
        path: Default::default(),
        source,
    })
}

pub fn load_thresholds_file<R: Read>(reader: R, path: &Path) -> Result<ThresholdFile> {
    serde_json::from_reader(reader).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}
