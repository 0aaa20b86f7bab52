//! Application profiles: relative costs of the four detection outcomes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

/// Outcome weights for one application profile.
///
/// Weights are nonnegative magnitudes; the scoring functions apply the
/// signs (true positives add, false positives and misses subtract). The
/// true-positive and true-negative weights are capped at 1 so a profile can
/// only re-balance penalties, not inflate the reward side.
#[derive(Debug, Clone, PartialEq)]
pub struct ApplicationProfile {
    name: String,
    tp: f64,
    fp: f64,
    fn_: f64,
    tn: f64,
}

/// False-positive weight of the balanced profile.
pub const STANDARD_FP_WEIGHT: f64 = 0.11;

impl ApplicationProfile {
    pub fn new(name: impl Into<String>, tp: f64, fp: f64, fn_: f64, tn: f64) -> Result<Self> {
        let name = name.into();
        for (label, w) in [("tp", tp), ("fp", fp), ("fn", fn_), ("tn", tn)] {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "profile `{name}`: weight `{label}` must be finite and nonnegative, got {w}"
                )));
            }
        }
        for (label, w) in [("tp", tp), ("tn", tn)] {
            if w > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "profile `{name}`: weight `{label}` must not exceed 1, got {w}"
                )));
            }
        }
        Ok(Self {
            name,
            tp,
            fp,
            fn_,
            tn,
        })
    }

    /// Balanced profile: misses and false alarms carry equal weight.
    pub fn standard() -> Self {
        Self::new("standard", 1.0, STANDARD_FP_WEIGHT, 1.0, 1.0).unwrap()
    }

    /// Doubles the false-positive penalty, for applications where alert
    /// fatigue is the dominant cost.
    pub fn reward_low_fp() -> Self {
        Self::new("reward_low_fp", 1.0, 2.0 * STANDARD_FP_WEIGHT, 1.0, 1.0).unwrap()
    }

    /// Doubles the miss penalty, for applications where a missed anomaly is
    /// the dominant cost.
    pub fn reward_low_fn() -> Self {
        Self::new("reward_low_fn", 1.0, STANDARD_FP_WEIGHT, 2.0, 1.0).unwrap()
    }

    /// The three built-in profiles, in report order.
    pub fn defaults() -> Vec<Self> {
        vec![
            Self::standard(),
            Self::reward_low_fp(),
            Self::reward_low_fn(),
        ]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tp_weight(&self) -> f64 {
        self.tp
    }

    pub fn fp_weight(&self) -> f64 {
        self.fp
    }

    pub fn fn_weight(&self) -> f64 {
        self.fn_
    }

    pub fn tn_weight(&self) -> f64 {
        self.tn
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWeights {
    tp: f64,
    fp: f64,
    #[serde(rename = "fn")]
    fn_: f64,
    tn: f64,
}

/// Read a `{name: {tp, fp, fn, tn}}` JSON document. Profiles come back
/// sorted by name.
pub fn load_profiles_file<R: Read>(reader: R, path: &Path) -> Result<Vec<ApplicationProfile>> {
    let raw: BTreeMap<String, RawWeights> =
        serde_json::from_reader(reader).map_err(|source| Error::Json {
            path: path.display().to_string(),
            source,
        })?;
    if raw.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "profile file {} defines no profiles",
            path.display()
        )));
    }
    raw.into_iter()
        .map(|(name, w)| ApplicationProfile::new(name, w.tp, w.fp, w.fn_, w.tn))
        .collect()
}

pub fn write_profiles_file<W: Write>(profiles: &[ApplicationProfile], writer: W) -> Result<()> {
    let map: BTreeMap<&str, RawWeights> = profiles
        .iter()
        .map(|p| {
            (
                p.name(),
                RawWeights {
                    tp: p.tp,
                    fp: p.fp,
                    fn_: p.fn_,
                    tn: p.tn,
                },
            )
        })
        .collect();
    serde_json::to_writer_pretty(writer, &map).map_err(|source| Error::Json {
        path: Default::default(),
        source,
    })
}
