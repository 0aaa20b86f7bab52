//! Streaming anomaly detectors.
//!
//! A detector consumes one record at a time and emits an anomaly score in
//! [0, 1] per record. Detectors are strictly causal: a score may depend
//! only on records already seen. Randomized detectors draw from a
//! per-stream generator seeded from the run seed and the stream name, so
//! results are reproducible regardless of worker count or file order.

mod anomaly_likelihood;
mod baseline;
mod external;
mod skyline;
mod windowed_gaussian;

pub use anomaly_likelihood::AnomalyLikelihood;
pub use baseline::{NullDetector, OracleDetector, RandomDetector};
pub use external::ExternalDetector;
pub use skyline::SkylineDetector;
pub use windowed_gaussian::WindowedGaussian;

use crate::corpus::TimeRecord;
use crate::error::{Error, Result};
use crate::scoring::WindowSpan;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

/// Parameter overrides applied to every detector instance of a run. The
/// object is recorded verbatim in the run manifest so results stay
/// reproducible from their artifacts.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    /// Sliding window of the Gaussian tail detector.
    pub gaussian_window: Option<usize>,
    /// Long window of the likelihood wrapper.
    pub likelihood_long_window: Option<usize>,
    /// Short window of the likelihood wrapper.
    pub likelihood_short_window: Option<usize>,
    /// Expert window of the voting ensemble.
    pub skyline_window: Option<usize>,
    /// Per-record reply timeout for external detectors, in seconds.
    pub external_timeout_seconds: Option<u64>,
}

impl DetectorConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text)
            .map_err(|e| Error::InvalidConfig(format!("bad detector config: {e}")))
    }
}

/// Per-stream facts available to a detector before the first record.
#[derive(Debug, Clone)]
pub struct StreamMetadata {
    pub name: String,
    pub record_count: usize,
    /// Number of leading records the benchmark will not score. Detectors
    /// typically use this span to calibrate.
    pub probation_length: usize,
}

/// A causal streaming anomaly detector.
pub trait Detector: Send {
    /// Called once per stream before the first record.
    fn initialize(&mut self, _metadata: &StreamMetadata) -> Result<()> {
        Ok(())
    }

    /// Consume the next record and score it in [0, 1].
    fn step(&mut self, record: &TimeRecord) -> Result<f64>;
}

/// 64-bit FNV-1a hash, used to derive stable per-stream seeds.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Seed for one stream: mixes the run seed with a hash of the stream name
/// so every stream gets an independent, order-insensitive generator.
pub fn stream_seed(run_seed: u64, stream_name: &str) -> u64 {
    run_seed ^ fnv1a64(stream_name.as_bytes())
}

/// Parsed detector selector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DetectorSpec {
    /// Constant 0.5: the do-nothing reference.
    Null,
    /// Uniform random scores.
    Random,
    /// Flags each window's first record; requires ground-truth windows.
    Oracle,
    /// Tail probability under a sliding Gaussian fit.
    WindowedGaussian,
    /// Three-expert voting ensemble.
    Skyline,
    /// Post-processes an inner detector's scores into likelihoods.
    AnomalyLikelihood(Box<DetectorSpec>),
    /// Child process speaking the line protocol.
    External(String),
}

impl DetectorSpec {
    /// Whether this selector (at any nesting level) reads the answer key.
    pub fn uses_ground_truth(&self) -> bool {
        match self {
            DetectorSpec::Oracle => true,
            DetectorSpec::AnomalyLikelihood(inner) => inner.uses_ground_truth(),
            _ => false,
        }
    }

    /// Directory-safe name: lowercase, `[a-z0-9_]` only.
    pub fn dir_name(&self) -> String {
        match self {
            DetectorSpec::Null => "null".into(),
            DetectorSpec::Random => "random".into(),
            DetectorSpec::Oracle => "oracle".into(),
            DetectorSpec::WindowedGaussian => "windowed_gaussian".into(),
            DetectorSpec::Skyline => "skyline".into(),
            DetectorSpec::AnomalyLikelihood(inner) => {
                format!("anomaly_likelihood_{}", inner.dir_name())
            }
            DetectorSpec::External(_) => "external".into(),
        }
    }
}

impl fmt::Display for DetectorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorSpec::Null => f.write_str("null"),
            DetectorSpec::Random => f.write_str("random"),
            DetectorSpec::Oracle => f.write_str("oracle"),
            DetectorSpec::WindowedGaussian => f.write_str("windowed_gaussian"),
            DetectorSpec::Skyline => f.write_str("skyline"),
            DetectorSpec::AnomalyLikelihood(inner) => write!(f, "anomaly_likelihood({inner})"),
            DetectorSpec::External(cmd) => write!(f, "external:{cmd}"),
        }
    }
}

impl FromStr for DetectorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(cmd) = s.strip_prefix("external:") {
            if cmd.trim().is_empty() {
                return Err(Error::InvalidConfig(
                    "external detector needs a command after `external:`".into(),
                ));
            }
            return Ok(DetectorSpec::External(cmd.to_owned()));
        }
        if let Some(rest) = s.strip_prefix("anomaly_likelihood(") {
            let inner = rest.strip_suffix(')').ok_or_else(|| {
                Error::InvalidConfig(format!("unbalanced parentheses in detector `{s}`"))
            })?;
            return Ok(DetectorSpec::AnomalyLikelihood(Box::new(inner.parse()?)));
        }
        match s {
            "null" => Ok(DetectorSpec::Null),
            "random" => Ok(DetectorSpec::Random),
            "oracle" => Ok(DetectorSpec::Oracle),
            "windowed_gaussian" => Ok(DetectorSpec::WindowedGaussian),
            "skyline" => Ok(DetectorSpec::Skyline),
            other => Err(Error::InvalidConfig(format!(
                "unknown detector `{other}` (expected null, random, oracle, windowed_gaussian, \
                 skyline, anomaly_likelihood(<inner>) or external:<command>)"
            ))),
        }
    }
}

/// Instantiate a detector for one stream.
///
/// `windows` is the stream's ground truth; it is only consulted by the
/// oracle detector and must be provided when (and only when) the selector
/// uses ground truth.
pub fn build_detector(
    spec: &DetectorSpec,
    stream_name: &str,
    run_seed: u64,
    windows: Option<&[WindowSpan]>,
    config: &DetectorConfig,
) -> Result<Box<dyn Detector>> {
    Ok(match spec {
        DetectorSpec::Null => Box::new(NullDetector),
        DetectorSpec::Random => Box::new(RandomDetector::new(stream_seed(run_seed, stream_name))),
        DetectorSpec::Oracle => {
            let windows = windows.ok_or_else(|| {
                Error::InvalidConfig(
                    "oracle detector requires ground-truth windows for the stream".into(),
                )
            })?;
            Box::new(OracleDetector::new(windows))
        }
        DetectorSpec::WindowedGaussian => Box::new(WindowedGaussian::new(
            config
                .gaussian_window
                .unwrap_or(windowed_gaussian::DEFAULT_WINDOW_SIZE),
        )),
        DetectorSpec::Skyline => Box::new(SkylineDetector::new(
            config
                .skyline_window
                .unwrap_or(skyline::DEFAULT_WINDOW_SIZE),
        )),
        DetectorSpec::AnomalyLikelihood(inner) => {
            let inner = build_detector(inner, stream_name, run_seed, windows, config)?;
            Box::new(AnomalyLikelihood::with_windows(
                inner,
                config
                    .likelihood_long_window
                    .unwrap_or(anomaly_likelihood::DEFAULT_LONG_WINDOW),
                config
                    .likelihood_short_window
                    .unwrap_or(anomaly_likelihood::DEFAULT_SHORT_WINDOW),
            ))
        }
        DetectorSpec::External(cmd) => {
            let timeout = config
                .external_timeout_seconds
                .map(Duration::from_secs)
                .unwrap_or(external::DEFAULT_STEP_TIMEOUT);
            Box::new(ExternalDetector::spawn_with_timeout(cmd, timeout)?)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selector_strings_round_trip() {
        for s in [
            "null",
            "random",
            "oracle",
            "windowed_gaussian",
            "skyline",
            "anomaly_likelihood(windowed_gaussian)",
            "anomaly_likelihood(random)",
            "external:python3 detect.py",
        ] {
            let spec: DetectorSpec = s.parse().unwrap();
            assert_eq!(spec.to_string(), s);
        }
    }

    #[test]
    fn bad_selectors_are_rejected() {
        assert!("htm".parse::<DetectorSpec>().is_err());
        assert!("anomaly_likelihood(null".parse::<DetectorSpec>().is_err());
        assert!("external:".parse::<DetectorSpec>().is_err());
    }

    #[test]
    fn ground_truth_flag_tracks_nesting() {
        let spec: DetectorSpec = "anomaly_likelihood(oracle)".parse().unwrap();
        assert!(spec.uses_ground_truth());
        let spec: DetectorSpec = "anomaly_likelihood(null)".parse().unwrap();
        assert!(!spec.uses_ground_truth());
    }

    #[test]
    fn dir_names_are_path_safe() {
        let spec: DetectorSpec = "anomaly_likelihood(windowed_gaussian)".parse().unwrap();
        assert_eq!(spec.dir_name(), "anomaly_likelihood_windowed_gaussian");
        let spec: DetectorSpec = "external:cat".parse().unwrap();
        assert_eq!(spec.dir_name(), "external");
    }

    #[test]
    fn fnv_matches_published_vectors() {
        // Reference vectors for 64-bit FNV-1a.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn stream_seeds_differ_by_name() {
        assert_ne!(stream_seed(7, "a.csv"), stream_seed(7, "b.csv"));
        assert_eq!(stream_seed(7, "a.csv"), stream_seed(7, "a.csv"));
    }

    #[test]
    fn oracle_requires_windows() {
        assert!(build_detector(
            &DetectorSpec::Oracle,
            "a.csv",
            0,
            None,
            &DetectorConfig::default()
        )
        .is_err());
    }

    #[test]
    fn config_json_rejects_unknown_keys() {
        assert!(DetectorConfig::from_json(r#"{"gaussian_window": 100}"#).is_ok());
        assert!(DetectorConfig::from_json(r#"{"gaussain_window": 100}"#).is_err());
        assert_eq!(
            DetectorConfig::from_json("{}").unwrap(),
            DetectorConfig::default()
        );
    }
}
