//! Likelihood post-processing for noisy detector scores.

use super::{Detector, StreamMetadata};
use crate::corpus::TimeRecord;
use crate::error::Result;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::VecDeque;

/// Trailing scores the long-term distribution is fit to.
pub const DEFAULT_LONG_WINDOW: usize = 500;
/// Trailing scores averaged into the short-term level.
pub const DEFAULT_SHORT_WINDOW: usize = 10;

/// Spread below this means the inner detector's output is flat, so no
/// deviation is meaningful.
const DEGENERATE_STD: f64 = 1e-9;

/// Turns an inner detector's raw scores into the likelihood that their
/// recent short-term mean is high relative to their long-term distribution:
/// `cdf((short_mean - long_mean) / long_std)`. Detectors whose raw output
/// is noisy but mostly stationary become usable after this smoothing, since
/// only sustained shifts push the likelihood toward 1.
pub struct AnomalyLikelihood {
    inner: Box<dyn Detector>,
    long_window: usize,
    short_window: usize,
    history: VecDeque<f64>,
    standard_normal: Normal,
}

impl AnomalyLikelihood {
    pub fn new(inner: Box<dyn Detector>) -> Self {
        Self::with_windows(inner, DEFAULT_LONG_WINDOW, DEFAULT_SHORT_WINDOW)
    }

    pub fn with_windows(inner: Box<dyn Detector>, long_window: usize, short_window: usize) -> Self {
        Self {
            inner,
            long_window: long_window.max(2),
            short_window: short_window.max(1),
            history: VecDeque::new(),
            standard_normal: Normal::standard(),
        }
    }
}

impl Detector for AnomalyLikelihood {
    fn initialize(&mut self, metadata: &StreamMetadata) -> Result<()> {
        self.inner.initialize(metadata)
    }

    fn step(&mut self, record: &TimeRecord) -> Result<f64> {
        let raw = self.inner.step(record)?;
        self.history.push_back(raw);
        if self.history.len() > self.long_window {
            self.history.pop_front();
        }
        if self.history.len() < 2 {
            return Ok(0.5);
        }
        let n = self.history.len() as f64;
        let long_mean = self.history.iter().sum::<f64>() / n;
        let variance = self
            .history
            .iter()
            .map(|v| (v - long_mean) * (v - long_mean))
            .sum::<f64>()
            / n;
        let std = variance.sqrt();
        if std < DEGENERATE_STD {
            return Ok(0.5);
        }
        let short = self.history.iter().rev().take(self.short_window);
        let short_len = short.len() as f64;
        let short_mean = short.sum::<f64>() / short_len;
        let likelihood = self.standard_normal.cdf((short_mean - long_mean) / std);
        Ok(likelihood.clamp(0.0, 1.0))
    }
}
