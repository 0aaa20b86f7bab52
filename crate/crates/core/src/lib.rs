//! Benchmark engine for streaming anomaly detection.
//!
//! The benchmark treats anomaly detection as a real-time problem: a
//! detector sees one record of a time series at a time, never the future,
//! and must say how anomalous the present looks. Credit is time-aware —
//! catching an anomaly early in its surrounding window earns more than
//! catching it late, false alarms cost more the further they fall from any
//! real anomaly, and every miss pays a flat penalty. Scores are normalized
//! so a do-nothing detector lands at 0 and a perfect one at 100, under
//! configurable application profiles that trade off false positives
//! against false negatives.
//!
//! The crate is organised around the benchmark's pipeline:
//!
//! - [`corpus`]: loading and validating time-series CSVs, ground-truth
//!   labels, anomaly windows, and synthetic corpus generation;
//! - [`detectors`]: reference streaming detectors plus an adapter for
//!   external detector processes;
//! - [`scoring`]: sigmoidal time-aware scoring under application profiles;
//! - [`optimizer`]: exact threshold search over a detector's score columns;
//! - [`runner`]: the end-to-end run — detect, persist, optimize, score,
//!   normalize, report.
//!
//! Heavy per-stream work runs on a thread pool when the `parallel` feature
//! (on by default) is enabled, and falls back to sequential execution
//! without it. Results are bit-identical either way.

pub mod corpus;
pub mod detectors;
pub mod error;
pub mod optimizer;
pub mod par;
pub mod runner;
pub mod scoring;

pub use error::{Error, Result};
