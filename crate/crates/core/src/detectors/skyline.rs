//! Voting ensemble of three cheap statistical experts.

use super::Detector;
use crate::corpus::TimeRecord;
use crate::error::Result;
use std::collections::VecDeque;

/// Trailing values each expert inspects.
pub const DEFAULT_WINDOW_SIZE: usize = 100;
/// Number of histogram bins.
const HISTOGRAM_BINS: usize = 20;
/// A histogram bin holding less than this fraction of the window votes its
/// value anomalous.
const RARE_BIN_FRACTION: f64 = 0.01;

/// Each expert votes on whether the current value is anomalous given the
/// previous `window_size` values; the score is the fraction of votes, so it
/// is always one of 0, 1/3, 2/3 or 1. Until three values of history exist
/// no expert can vote and the score is 0.
///
/// The experts:
/// 1. deviation from the window mean beyond three standard deviations;
/// 2. deviation from a least-squares trend line beyond three residual
///    standard deviations (with a small epsilon so exact fits do not vote
///    on rounding noise);
/// 3. landing in a histogram bin holding less than 1% of the window.
#[derive(Debug, Clone)]
pub struct SkylineDetector {
    window_size: usize,
    history: VecDeque<f64>,
}

impl Default for SkylineDetector {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW_SIZE)
    }
}

impl SkylineDetector {
    pub fn new(window_size: usize) -> Self {
        Self {
            window_size: window_size.max(3),
            history: VecDeque::new(),
        }
    }

    fn vote_mean_deviation(&self, x: f64) -> bool {
        let n = self.history.len() as f64;
        let mean = self.history.iter().sum::<f64>() / n;
        let variance = self
            .history
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        (x - mean).abs() > 3.0 * variance.sqrt()
    }

    fn vote_trend_deviation(&self, x: f64) -> bool {
        let m = self.history.len();
        let n = m as f64;
        let mean_i = (n - 1.0) / 2.0;
        let mean_v = self.history.iter().sum::<f64>() / n;
        let mut sxy = 0.0;
        let mut sxx = 0.0;
        for (i, &v) in self.history.iter().enumerate() {
            let di = i as f64 - mean_i;
            sxy += di * (v - mean_v);
            sxx += di * di;
        }
        let slope = sxy / sxx;
        let intercept = mean_v - slope * mean_i;
        let residual_var = self
            .history
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let r = v - (intercept + slope * i as f64);
                r * r
            })
            .sum::<f64>()
            / n;
        let predicted = intercept + slope * n;
        (x - predicted).abs() > 3.0 * residual_var.sqrt() + 1e-9 * (1.0 + x.abs())
    }

    fn vote_rare_bin(&self, x: f64) -> bool {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in &self.history {
            min = min.min(v);
            max = max.max(v);
        }
        if min == max {
            return x != min;
        }
        if x < min || x > max {
            return true;
        }
        let width = (max - min) / HISTOGRAM_BINS as f64;
        let bin_of = |v: f64| (((v - min) / width) as usize).min(HISTOGRAM_BINS - 1);
        let mut counts = [0usize; HISTOGRAM_BINS];
        for &v in &self.history {
            counts[bin_of(v)] += 1;
        }
        let mass = counts[bin_of(x)] as f64 / self.history.len() as f64;
        mass < RARE_BIN_FRACTION
    }
}

impl Detector for SkylineDetector {
    fn step(&mut self, record: &TimeRecord) -> Result<f64> {
        let x = record.value;
        let score = if self.history.len() < 3 {
            0.0
        } else {
            let votes = self.vote_mean_deviation(x) as u32
                + self.vote_trend_deviation(x) as u32
                + self.vote_rare_bin(x) as u32;
            votes as f64 / 3.0
        };
        self.history.push_back(x);
        if self.history.len() > self.window_size {
            self.history.pop_front();
        }
        Ok(score)
    }
}
