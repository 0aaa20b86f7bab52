//! Gaussian tail-probability detector over a sliding window.

use super::Detector;
use crate::corpus::TimeRecord;
use crate::error::Result;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::VecDeque;

/// Default number of trailing values the Gaussian is fit to.
pub const DEFAULT_WINDOW_SIZE: usize = 250;

/// Variance below this is treated as a constant signal.
const DEGENERATE_VARIANCE: f64 = 1e-16;

/// Scores each value by how far into the tails of a Gaussian — fit to the
/// previous `window_size` values — it falls: `2 * cdf(|z|) - 1`, which is 0
/// at the mean and approaches 1 in the far tails. The current value never
/// feeds its own fit, so scores are strictly causal.
#[derive(Debug, Clone)]
pub struct WindowedGaussian {
    window_size: usize,
    history: VecDeque<f64>,
    standard_normal: Normal,
}

impl WindowedGaussian {
    pub fn new(window_size: usize) -> Self {
        Self {
            window_size: window_size.max(2),
            history: VecDeque::new(),
            standard_normal: Normal::standard(),
        }
    }
}

impl Default for WindowedGaussian {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_SIZE)
    }
}

impl Detector for WindowedGaussian {
    fn step(&mut self, record: &TimeRecord) -> Result<f64> {
        let x = record.value;
        let score = if self.history.is_empty() {
            // No history to judge against; the window grows from one prior
            // value at the second record.
            0.5
        } else {
            let n = self.history.len() as f64;
            let mean = self.history.iter().sum::<f64>() / n;
            let variance = self
                .history
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / n;
            if variance < DEGENERATE_VARIANCE {
                // Constant history: flag anything that moves, but tolerate
                // floating-point wobble around the constant.
                if (x - mean).abs() <= 1e-8 * mean.abs().max(1.0) {
                    0.0
                } else {
                    1.0
                }
            } else {
                let z = (x - mean) / variance.sqrt();
                2.0 * self.standard_normal.cdf(z.abs()) - 1.0
            }
        };
        self.history.push_back(x);
        if self.history.len() > self.window_size {
            self.history.pop_front();
        }
        Ok(score)
    }
}
