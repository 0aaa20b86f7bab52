//! Time-aware scoring of detections against anomaly windows.
//!
//! Detections earn credit on a scaled sigmoid over their position relative
//! to the window they land in (earlier is better), false alarms lose credit
//! on the same curve relative to the window they trail, and missed windows
//! pay a flat penalty. Raw totals are normalized against two fixed
//! baselines — a detector that flags nothing and one that flags every
//! window at its first record — so 0 means "did nothing" and 100 means
//! "caught everything immediately with no false alarms".

mod profiles;
mod report;

pub use profiles::{
    load_profiles_file, write_profiles_file, ApplicationProfile, STANDARD_FP_WEIGHT,
};
pub use report::{
    load_score_report, write_score_report, write_scoreboard_csv, DetectorScores,
    ProfileScoreSummary, ScoreReport,
};

use crate::corpus::{AnomalyWindow, Corpus};
use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Closed record-index interval of one anomaly window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpan {
    pub begin: usize,
    pub end: usize,
}

impl WindowSpan {
    pub fn len(&self) -> usize {
        self.end - self.begin + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, index: usize) -> bool {
        self.begin <= index && index <= self.end
    }
}

/// Scaled sigmoid mapping a relative position to a score in (-1, 1).
///
/// Zero at the window's right edge, positive inside the window, negative
/// after it. Beyond three window-widths past the end the curve is within
/// 1e-6 of its asymptote and is clamped to exactly -1 so far-away false
/// positives of any distance cost the same.
pub fn scaled_sigmoid(y: f64) -> f64 {
    if y > 3.0 {
        return -1.0;
    }
    2.0 / (1.0 + (5.0 * y).exp()) - 1.0
}

/// Position of `index` relative to a window, in units of the window width:
/// -(W-1)/W at the first record, 0 at the last, positive past the end.
pub fn relative_position(index: usize, window: WindowSpan) -> f64 {
    (index as f64 - window.end as f64) / window.len() as f64
}

/// Position weight of a detection inside `window`.
pub fn position_weight(index: usize, window: WindowSpan) -> f64 {
    debug_assert!(window.contains(index));
    scaled_sigmoid(relative_position(index, window))
}

/// Position weight of a false positive relative to the closest preceding
/// window, or the flat worst-case weight when no window precedes it.
pub fn fp_position_weight(index: usize, preceding: Option<WindowSpan>) -> f64 {
    match preceding {
        Some(w) => scaled_sigmoid(relative_position(index, w)),
        None => -1.0,
    }
}

/// How one detection was judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Earliest detection inside a window.
    TruePositive,
    /// Detection outside every window.
    FalsePositive,
    /// Later detection in an already-credited window; carries no weight.
    Ignored,
    /// Detection during the probationary period; carries no weight.
    Probationary,
}

/// A detection with its judgment and position weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifiedDetection {
    pub index: usize,
    pub classification: Classification,
    /// Sigmoid position weight: positive for true positives, negative for
    /// false positives, zero for ignored and probationary detections.
    pub sigma: f64,
}

impl ClassifiedDetection {
    /// Signed contribution to the raw score under `profile`.
    pub fn contribution(&self, profile: &ApplicationProfile) -> f64 {
        match self.classification {
            Classification::TruePositive => profile.tp_weight() * self.sigma,
            Classification::FalsePositive => profile.fp_weight() * self.sigma,
            Classification::Ignored | Classification::Probationary => 0.0,
        }
    }
}

fn validate_windows(windows: &[WindowSpan], probation_end: usize, n_records: usize) -> Result<()> {
    let mut prev_end: Option<usize> = None;
    for w in windows {
        if w.begin > w.end || w.end >= n_records || w.begin < probation_end {
            return Err(Error::InvalidConfig(format!(
                "window [{}, {}] is outside the scored region [{}, {}]",
                w.begin,
                w.end,
                probation_end,
                n_records.saturating_sub(1)
            )));
        }
        if let Some(pe) = prev_end {
            if w.begin <= pe {
                return Err(Error::InvalidConfig(format!(
                    "windows are not sorted and disjoint near [{}, {}]",
                    w.begin, w.end
                )));
            }
        }
        prev_end = Some(w.end);
    }
    Ok(())
}

/// Judge a sorted list of detection indices against a stream's windows.
///
/// Duplicate indices are collapsed; a decreasing index is an error. Within
/// each window only the earliest detection earns credit. Detections outside
/// every window are false positives weighted by distance past the closest
/// preceding window; with no preceding window they take the flat worst-case
/// weight. Probationary detections are kept in the output (for reporting)
/// but never carry weight.
pub fn classify_detections(
    detection_indices: &[usize],
    windows: &[WindowSpan],
    probation_end: usize,
    n_records: usize,
) -> Result<Vec<ClassifiedDetection>> {
    validate_windows(windows, probation_end, n_records)?;
    let mut out = Vec::with_capacity(detection_indices.len());
    let mut last: Option<usize> = None;
    // Index of the window a true positive was already credited to.
    let mut credited: Option<usize> = None;
    for &index in detection_indices {
        if last == Some(index) {
            continue;
        }
        if let Some(prev) = last {
            if index < prev {
                return Err(Error::UnsortedDetections);
            }
        }
        last = Some(index);
        if index >= n_records {
            return Err(Error::InvalidConfig(format!(
                "detection index {index} is outside the stream (length {n_records})"
            )));
        }
        if index < probation_end {
            out.push(ClassifiedDetection {
                index,
                classification: Classification::Probationary,
                sigma: 0.0,
            });
            continue;
        }
        // Last window starting at or before the detection: either contains
        // it or is the closest preceding window.
        let candidate = windows.partition_point(|w| w.begin <= index).checked_sub(1);
        match candidate {
            Some(wi) if windows[wi].contains(index) => {
                if credited == Some(wi) {
                    out.push(ClassifiedDetection {
                        index,
                        classification: Classification::Ignored,
                        sigma: 0.0,
                    });
                } else {
                    credited = Some(wi);
                    out.push(ClassifiedDetection {
                        index,
                        classification: Classification::TruePositive,
                        sigma: position_weight(index, windows[wi]),
                    });
                }
            }
            _ => {
                let preceding = candidate.map(|wi| windows[wi]);
                out.push(ClassifiedDetection {
                    index,
                    classification: Classification::FalsePositive,
                    sigma: fp_position_weight(index, preceding),
                });
            }
        }
    }
    Ok(out)
}

/// Combine position weights into a raw score: credited windows add, false
/// positives subtract, and each missed window pays the flat miss penalty.
pub fn weighted_score(
    profile: &ApplicationProfile,
    tp_sigmas: &[f64],
    fp_sigmas: &[f64],
    missed_windows: usize,
) -> f64 {
    let tp: f64 = tp_sigmas.iter().map(|s| profile.tp_weight() * s).sum();
    let fp: f64 = fp_sigmas.iter().map(|s| profile.fp_weight() * s).sum();
    tp + fp - profile.fn_weight() * missed_windows as f64
}

/// Score for one stream under one profile.
#[derive(Debug, Clone)]
pub struct FileScore {
    pub stream: String,
    pub raw: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub detections: Vec<ClassifiedDetection>,
}

/// Score one stream's detections under `profile`.
///
/// True negatives are the scored records left over once window records and
/// false positives are accounted for.
pub fn score_file(
    stream: &str,
    detection_indices: &[usize],
    windows: &[WindowSpan],
    probation_end: usize,
    n_records: usize,
    profile: &ApplicationProfile,
) -> Result<FileScore> {
    let detections = classify_detections(detection_indices, windows, probation_end, n_records)?;
    let mut raw = 0.0;
    let mut tp = 0usize;
    let mut fp = 0usize;
    for d in &detections {
        raw += d.contribution(profile);
        match d.classification {
            Classification::TruePositive => tp += 1,
            Classification::FalsePositive => fp += 1,
            _ => {}
        }
    }
    let missed = windows.len() - tp;
    raw -= profile.fn_weight() * missed as f64;
    let window_records: usize = windows.iter().map(WindowSpan::len).sum();
    let scored = n_records - probation_end;
    let tn = scored.saturating_sub(window_records).saturating_sub(fp);
    Ok(FileScore {
        stream: stream.to_owned(),
        raw,
        true_positives: tp,
        false_positives: fp,
        false_negatives: missed,
        true_negatives: tn,
        detections,
    })
}

/// Raw score of a detector that flags every window at its first record and
/// nothing else.
pub fn perfect_raw(
    windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
    profile: &ApplicationProfile,
) -> f64 {
    windows_by_file
        .values()
        .flatten()
        .map(|w| {
            let span = w.span();
            profile.tp_weight() * position_weight(span.begin, span)
        })
        .sum()
}

/// Raw score of a detector that never flags anything: every window missed.
pub fn null_raw(
    windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
    profile: &ApplicationProfile,
) -> f64 {
    let count: usize = windows_by_file.values().map(Vec::len).sum();
    -profile.fn_weight() * count as f64
}

/// Map a raw corpus score onto the 0-100 scale where the do-nothing
/// baseline is 0 and the flag-every-window-immediately baseline is 100.
pub fn normalize(raw: f64, perfect: f64, null: f64) -> Result<f64> {
    let denom = perfect - null;
    // `<= 0.0` misses NaN, so the finiteness check also guards against it.
    if denom <= 0.0 || !denom.is_finite() {
        return Err(Error::DegenerateNormalization { perfect, null });
    }
    Ok(100.0 * (raw - null) / denom)
}

/// Corpus-level score for one profile.
#[derive(Debug, Clone)]
pub struct CorpusScore {
    pub profile: String,
    pub raw: f64,
    pub null_raw: f64,
    pub perfect_raw: f64,
    pub normalized: f64,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub per_file: Vec<FileScore>,
}

/// Score detections for every stream in the corpus and normalize the total.
///
/// `detections_by_file` must cover exactly the corpus streams; a stream
/// without results (or results for an unknown stream) is an error rather
/// than a silent zero. Streams absent from `windows_by_file` have no
/// anomalies: every detection in them is a false positive.
pub fn score_corpus(
    corpus: &Corpus,
    windows_by_file: &BTreeMap<String, Vec<AnomalyWindow>>,
    detections_by_file: &BTreeMap<String, Vec<usize>>,
    profile: &ApplicationProfile,
) -> Result<CorpusScore> {
    for name in detections_by_file.keys() {
        if corpus.stream(name).is_none() {
            return Err(Error::MissingFile(format!(
                "detections reference unknown stream `{name}`"
            )));
        }
    }
    let mut jobs = Vec::with_capacity(corpus.streams().len());
    for stream in corpus.streams() {
        let dets = detections_by_file
            .get(stream.name())
            .ok_or_else(|| {
                Error::MissingFile(format!("no detections for stream `{}`", stream.name()))
            })?
            .clone();
        let spans: Vec<WindowSpan> = windows_by_file
            .get(stream.name())
            .map(|ws| ws.iter().map(AnomalyWindow::span).collect())
            .unwrap_or_default();
        jobs.push((
            stream.name().to_owned(),
            dets,
            spans,
            stream.probation_end_index(),
            stream.len(),
        ));
    }
    let per_file = crate::par::try_map(jobs, |(name, dets, spans, probation, n)| {
        score_file(&name, &dets, &spans, probation, n, profile)
    })?;

    let raw: f64 = per_file.iter().map(|f| f.raw).sum();
    let perfect = perfect_raw(windows_by_file, profile);
    let null = null_raw(windows_by_file, profile);
    let normalized = normalize(raw, perfect, null)?;
    Ok(CorpusScore {
        profile: profile.name().to_owned(),
        raw,
        null_raw: null,
        perfect_raw: perfect,
        normalized,
        true_positives: per_file.iter().map(|f| f.true_positives).sum(),
        false_positives: per_file.iter().map(|f| f.false_positives).sum(),
        false_negatives: per_file.iter().map(|f| f.false_negatives).sum(),
        true_negatives: per_file.iter().map(|f| f.true_negatives).sum(),
        per_file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn sigmoid_is_zero_at_window_end() {
        assert_eq!(scaled_sigmoid(0.0), 0.0);
    }

    #[test]
    fn sigmoid_matches_frozen_values() {
        assert_relative_eq!(scaled_sigmoid(-1.0), 0.9866142981514305, epsilon = 1e-12);
        assert_relative_eq!(scaled_sigmoid(-0.99), 0.9859328256900097, epsilon = 1e-12);
        assert_relative_eq!(scaled_sigmoid(-0.5), 0.8482836399575131, epsilon = 1e-12);
        assert_relative_eq!(scaled_sigmoid(0.5), -0.8482836399575129, epsilon = 1e-12);
        assert_relative_eq!(scaled_sigmoid(1.0), -0.9866142981514303, epsilon = 1e-12);
    }

    #[test]
    fn sigmoid_five_digit_reference() {
        // Published reference value for a detection at the left edge of a
        // window, one full width before the end.
        assert!((scaled_sigmoid(-1.0) - 0.98661).abs() < 5e-6);
    }

    #[test]
    fn sigmoid_saturates_past_three_widths() {
        assert_eq!(scaled_sigmoid(3.0 + 1e-9), -1.0);
        assert_eq!(scaled_sigmoid(100.0), -1.0);
        // At exactly three widths the curve is still live.
        assert_relative_eq!(scaled_sigmoid(3.0), -0.9999993881955461, epsilon = 1e-12);
    }

    #[test]
    fn relative_position_spans_window() {
        let w = WindowSpan {
            begin: 100,
            end: 299,
        };
        assert_relative_eq!(relative_position(100, w), -199.0 / 200.0);
        assert_eq!(relative_position(299, w), 0.0);
        assert_relative_eq!(relative_position(399, w), 0.5);
    }

    fn sigmas(detections: &[ClassifiedDetection], class: Classification) -> Vec<f64> {
        detections
            .iter()
            .filter(|d| d.classification == class)
            .map(|d| d.sigma)
            .collect()
    }

    #[test]
    fn earliest_detection_in_window_wins() {
        let windows = [WindowSpan {
            begin: 200,
            end: 299,
        }];
        let out = classify_detections(&[210, 250, 290], &windows, 100, 1000).unwrap();
        assert_eq!(out[0].classification, Classification::TruePositive);
        assert_eq!(out[1].classification, Classification::Ignored);
        assert_eq!(out[2].classification, Classification::Ignored);
        assert_relative_eq!(out[0].sigma, scaled_sigmoid(-89.0 / 100.0));
        assert_eq!(out[1].sigma, 0.0);
    }

    #[test]
    fn detection_before_any_window_takes_flat_penalty() {
        let windows = [WindowSpan {
            begin: 500,
            end: 599,
        }];
        let out = classify_detections(&[200], &windows, 100, 1000).unwrap();
        assert_eq!(out[0].classification, Classification::FalsePositive);
        assert_eq!(out[0].sigma, -1.0);
    }

    #[test]
    fn detection_in_windowless_stream_takes_flat_penalty() {
        let out = classify_detections(&[500], &[], 100, 1000).unwrap();
        assert_eq!(out[0].classification, Classification::FalsePositive);
        assert_eq!(out[0].sigma, -1.0);
    }

    #[test]
    fn false_positive_decays_with_distance_from_preceding_window() {
        let windows = [WindowSpan {
            begin: 200,
            end: 299,
        }];
        let out = classify_detections(&[349, 450, 601], &windows, 100, 1000).unwrap();
        assert_relative_eq!(out[0].sigma, scaled_sigmoid(0.5), epsilon = 1e-12);
        assert_relative_eq!(out[1].sigma, scaled_sigmoid(1.51), epsilon = 1e-12);
        // More than three widths out: clamped to the flat penalty.
        assert_eq!(out[2].sigma, -1.0);
        assert!(out[0].sigma > out[1].sigma);
    }

    #[test]
    fn false_positive_uses_closest_preceding_window() {
        let windows = [
            WindowSpan {
                begin: 200,
                end: 299,
            },
            WindowSpan {
                begin: 500,
                end: 599,
            },
        ];
        let out = classify_detections(&[650], &windows, 100, 1000).unwrap();
        assert_relative_eq!(out[0].sigma, scaled_sigmoid(51.0 / 100.0), epsilon = 1e-12);
    }

    #[test]
    fn probationary_detections_carry_no_weight() {
        let windows = [WindowSpan {
            begin: 200,
            end: 299,
        }];
        let out = classify_detections(&[50, 210], &windows, 150, 1000).unwrap();
        assert_eq!(out[0].classification, Classification::Probationary);
        assert_eq!(out[0].sigma, 0.0);
        assert_eq!(out[0].contribution(&ApplicationProfile::standard()), 0.0);
        assert_eq!(out[1].classification, Classification::TruePositive);
    }

    #[test]
    fn duplicates_collapse_and_disorder_errors() {
        let windows = [WindowSpan {
            begin: 200,
            end: 299,
        }];
        let out = classify_detections(&[210, 210, 400], &windows, 100, 1000).unwrap();
        assert_eq!(out.len(), 2);
        let err = classify_detections(&[400, 210], &windows, 100, 1000).unwrap_err();
        assert!(matches!(err, Error::UnsortedDetections));
    }

    #[test]
    fn out_of_range_detection_rejected() {
        assert!(classify_detections(&[1000], &[], 100, 1000).is_err());
    }

    #[test]
    fn misordered_windows_rejected() {
        let windows = [
            WindowSpan {
                begin: 500,
                end: 599,
            },
            WindowSpan {
                begin: 200,
                end: 299,
            },
        ];
        assert!(classify_detections(&[], &windows, 100, 1000).is_err());
        let overlapping = [
            WindowSpan {
                begin: 200,
                end: 299,
            },
            WindowSpan {
                begin: 250,
                end: 350,
            },
        ];
        assert!(classify_detections(&[], &overlapping, 100, 1000).is_err());
    }

    #[test]
    fn worked_example_total_matches_published_score() {
        // One window caught almost immediately, three false alarms: two with
        // no preceding window and one trailing the window at sigma -0.8093.
        let raw = weighted_score(
            &ApplicationProfile::standard(),
            &[0.9999],
            &[-1.0, -0.8093, -1.0],
            0,
        );
        assert_relative_eq!(raw, 0.690877, epsilon = 1e-9);
        assert!((raw - 0.6909).abs() < 5e-5);
    }

    #[test]
    fn balanced_fp_weight_reproduces_published_total() {
        // Solving the worked example for the false-positive weight recovers
        // the balanced profile's 0.11.
        let implied = (0.9999 - 0.6909) / (1.0 + 0.8093 + 1.0);
        assert!((implied - STANDARD_FP_WEIGHT).abs() < 1e-3);
    }

    #[test]
    fn file_score_counts_every_outcome() {
        let windows = [
            WindowSpan {
                begin: 200,
                end: 299,
            },
            WindowSpan {
                begin: 600,
                end: 699,
            },
        ];
        let profile = ApplicationProfile::standard();
        // One hit in the first window (plus an ignored repeat), one false
        // positive, second window missed.
        let score = score_file("s.csv", &[200, 250, 400], &windows, 150, 1000, &profile).unwrap();
        assert_eq!(score.true_positives, 1);
        assert_eq!(score.false_positives, 1);
        assert_eq!(score.false_negatives, 1);
        // 850 scored records, 200 inside windows, 1 false positive.
        assert_eq!(score.true_negatives, 649);
        let expected = profile.tp_weight() * scaled_sigmoid(-99.0 / 100.0)
            + profile.fp_weight() * scaled_sigmoid(101.0 / 100.0)
            - profile.fn_weight();
        assert_relative_eq!(score.raw, expected, epsilon = 1e-12);
    }

    #[test]
    fn no_detections_scores_pure_miss_penalty() {
        let windows = [WindowSpan {
            begin: 200,
            end: 299,
        }];
        let profile = ApplicationProfile::reward_low_fn();
        let score = score_file("s.csv", &[], &windows, 150, 1000, &profile).unwrap();
        assert_eq!(score.raw, -2.0);
        assert_eq!(score.false_negatives, 1);
        assert_eq!(score.true_negatives, 750);
    }

    #[test]
    fn normalization_pins_baselines() {
        assert_eq!(normalize(-4.0, 10.0, -4.0).unwrap(), 0.0);
        assert_eq!(normalize(10.0, 10.0, -4.0).unwrap(), 100.0);
        assert_relative_eq!(normalize(3.0, 10.0, -4.0).unwrap(), 50.0);
        // Worse than doing nothing goes negative.
        assert!(normalize(-6.0, 10.0, -4.0).unwrap() < 0.0);
    }

    #[test]
    fn degenerate_normalization_is_an_error() {
        assert!(matches!(
            normalize(0.0, 0.0, 0.0),
            Err(Error::DegenerateNormalization { .. })
        ));
        assert!(normalize(0.0, -1.0, 0.0).is_err());
    }

    #[test]
    fn classified_sigmas_feed_weighted_score() {
        let windows = [WindowSpan {
            begin: 200,
            end: 299,
        }];
        let profile = ApplicationProfile::standard();
        let detections = classify_detections(&[150, 210, 400], &windows, 100, 1000).unwrap();
        let tp = sigmas(&detections, Classification::TruePositive);
        let fp = sigmas(&detections, Classification::FalsePositive);
        let total = weighted_score(&profile, &tp, &fp, 0);
        let direct = score_file("s.csv", &[150, 210, 400], &windows, 100, 1000, &profile)
            .unwrap()
            .raw;
        assert_relative_eq!(total, direct, epsilon = 1e-12);
    }
}
