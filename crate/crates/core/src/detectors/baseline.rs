//! Reference detectors that anchor the score scale.

use super::Detector;
use crate::corpus::TimeRecord;
use crate::error::Result;
use crate::scoring::WindowSpan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Emits 0.5 for every record. With an optimized threshold this detector
/// ends up detecting nothing, which is the definition of normalized 0.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullDetector;

impl Detector for NullDetector {
    fn step(&mut self, _record: &TimeRecord) -> Result<f64> {
        Ok(0.5)
    }
}

/// Emits uniform scores in [0, 1). The generator is a portable fixed
/// algorithm, so a given seed produces the same scores on every platform.
#[derive(Debug, Clone)]
pub struct RandomDetector {
    rng: ChaCha8Rng,
}

impl RandomDetector {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Detector for RandomDetector {
    fn step(&mut self, _record: &TimeRecord) -> Result<f64> {
        Ok(self.rng.random::<f64>())
    }
}

/// Reads the answer key: emits 1.0 at the first record of every anomaly
/// window and 0.0 elsewhere. With an optimized threshold this is the
/// definition of normalized 100. Only runnable when explicitly allowed,
/// since it is an upper bound, not a detector.
#[derive(Debug, Clone)]
pub struct OracleDetector {
    window_begins: Vec<usize>,
    position: usize,
}

impl OracleDetector {
    pub fn new(windows: &[WindowSpan]) -> Self {
        Self {
            window_begins: windows.iter().map(|w| w.begin).collect(),
            position: 0,
        }
    }
}

impl Detector for OracleDetector {
    fn step(&mut self, _record: &TimeRecord) -> Result<f64> {
        let index = self.position;
        self.position += 1;
        Ok(if self.window_begins.binary_search(&index).is_ok() {
            1.0
        } else {
            0.0
        })
    }
}
