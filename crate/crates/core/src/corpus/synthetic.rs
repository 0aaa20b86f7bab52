//! Deterministic synthetic streams with injected anomalies.

use super::labels::GroundTruthLabels;
use super::stream::{parse_timestamp, probation_length, DataStream, TimeRecord, Timestamp};
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::fmt;
use std::str::FromStr;

/// Anomaly shape injected into the base signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Single-point excursion of `SPIKE_SIGMAS` noise deviations.
    Spike,
    /// Mean shifted by `SHIFT_SIGMAS` noise deviations from the position on.
    LevelShift,
    /// Sinusoid frequency doubled from the position on.
    FrequencyChange,
    /// Clean base signal, no labels.
    NoiseOnly,
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SyntheticKind::Spike => "spike",
            SyntheticKind::LevelShift => "level_shift",
            SyntheticKind::FrequencyChange => "frequency_change",
            SyntheticKind::NoiseOnly => "noise_only",
        };
        f.write_str(s)
    }
}

impl FromStr for SyntheticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spike" => Ok(SyntheticKind::Spike),
            "level_shift" => Ok(SyntheticKind::LevelShift),
            "frequency_change" => Ok(SyntheticKind::FrequencyChange),
            "noise_only" => Ok(SyntheticKind::NoiseOnly),
            other => Err(Error::InvalidConfig(format!(
                "unknown synthetic kind `{other}` (expected spike, level_shift, frequency_change or noise_only)"
            ))),
        }
    }
}

/// Base-signal parameters: a sinusoid plus Gaussian noise on a constant
/// offset, sampled at a fixed interval.
#[derive(Debug, Clone)]
pub struct SyntheticParams {
    pub offset: f64,
    pub amplitude: f64,
    /// Sinusoid period in records.
    pub period: f64,
    pub noise_sigma: f64,
    pub start: Timestamp,
    pub interval_seconds: i64,
}

/// Spike excursion, in units of `noise_sigma`.
pub const SPIKE_SIGMAS: f64 = 10.0;
/// Level-shift magnitude, in units of `noise_sigma`.
pub const SHIFT_SIGMAS: f64 = 8.0;

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            offset: 20.0,
            amplitude: 5.0,
            period: 100.0,
            noise_sigma: 1.0,
            start: parse_timestamp("2015-01-01 00:00:00").unwrap(),
            interval_seconds: 300,
        }
    }
}

/// Generate a synthetic stream with default parameters. Pure function of
/// its arguments: the same inputs always produce the same bytes.
pub fn generate_synthetic(
    kind: SyntheticKind,
    n_records: usize,
    anomaly_positions: &[usize],
    seed: u64,
) -> Result<(DataStream, GroundTruthLabels)> {
    let name = format!("{kind}_{seed}.csv");
    generate_synthetic_named(
        &name,
        kind,
        n_records,
        anomaly_positions,
        seed,
        &SyntheticParams::default(),
    )
}

pub fn generate_synthetic_named(
    name: &str,
    kind: SyntheticKind,
    n_records: usize,
    anomaly_positions: &[usize],
    seed: u64,
    params: &SyntheticParams,
) -> Result<(DataStream, GroundTruthLabels)> {
    if n_records < 100 {
        return Err(Error::InvalidConfig(format!(
            "synthetic streams need at least 100 records, got {n_records}"
        )));
    }
    let probation = probation_length(n_records, None);
    let mut positions = anomaly_positions.to_vec();
    positions.sort_unstable();
    positions.dedup();
    for &p in &positions {
        if p >= n_records {
            return Err(Error::InvalidConfig(format!(
                "anomaly position {p} is outside the stream (length {n_records})"
            )));
        }
        if p < probation {
            return Err(Error::InvalidConfig(format!(
                "anomaly position {p} falls inside the probationary period (ends at {probation})"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_sigma).expect("sigma is finite");

    let mut records = Vec::with_capacity(n_records);
    let mut phase = 0.0f64;
    let mut phase_step = std::f64::consts::TAU / params.period;
    let mut level = params.offset;
    let mut next_pos = positions.iter().copied().peekable();

    for i in 0..n_records {
        let at_anomaly = next_pos.peek() == Some(&i);
        if at_anomaly {
            next_pos.next();
            match kind {
                SyntheticKind::LevelShift => level += SHIFT_SIGMAS * params.noise_sigma,
                SyntheticKind::FrequencyChange => phase_step *= 2.0,
                SyntheticKind::Spike | SyntheticKind::NoiseOnly => {}
            }
        }
        let clean = level + params.amplitude * phase.sin();
        let e: f64 = noise.sample(&mut rng);
        // A spike replaces the noise term so the excursion size is exact.
        let value = if at_anomaly && kind == SyntheticKind::Spike {
            clean + SPIKE_SIGMAS * params.noise_sigma
        } else {
            clean + e
        };
        let timestamp =
            params.start + chrono::Duration::seconds(params.interval_seconds * i as i64);
        records.push(TimeRecord { timestamp, value });
        phase += phase_step;
    }

    let stream = DataStream::new(name.to_owned(), records, None)?;
    let labels = if kind == SyntheticKind::NoiseOnly {
        GroundTruthLabels::default()
    } else {
        GroundTruthLabels::from_timestamps(
            positions
                .iter()
                .map(|&p| stream.records()[p].timestamp)
                .collect(),
        )
    };
    Ok((stream, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::stream::write_stream;

    #[test]
    fn noise_only_has_no_labels() {
        let (_, labels) = generate_synthetic(SyntheticKind::NoiseOnly, 500, &[], 3).unwrap();
        assert!(labels.is_empty());
    }

    #[test]
    fn identical_seeds_give_identical_bytes() {
        let run = || {
            let (stream, _) = generate_synthetic(SyntheticKind::Spike, 2000, &[1000], 7).unwrap();
            let mut buf = Vec::new();
            write_stream(&stream, &mut buf).unwrap();
            buf
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn different_seeds_differ() {
        let (a, _) = generate_synthetic(SyntheticKind::NoiseOnly, 500, &[], 1).unwrap();
        let (b, _) = generate_synthetic(SyntheticKind::NoiseOnly, 500, &[], 2).unwrap();
        assert_ne!(a.records()[0].value, b.records()[0].value);
    }

    #[test]
    fn level_shift_moves_the_mean() {
        let (stream, labels) =
            generate_synthetic(SyntheticKind::LevelShift, 2000, &[1000], 11).unwrap();
        assert_eq!(labels.len(), 1);
        let values: Vec<f64> = stream.values().collect();
        let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
        let before = mean(&values[200..1000]);
        let after = mean(&values[1000..2000]);
        let sigma = SyntheticParams::default().noise_sigma;
        assert!(
            after - before >= 5.0 * sigma,
            "shift {} below 5 sigma",
            after - before
        );
    }

    #[test]
    fn spike_is_a_big_single_point_excursion() {
        let params = SyntheticParams::default();
        let (stream, _) = generate_synthetic(SyntheticKind::Spike, 2000, &[1000], 7).unwrap();
        let (clean, _) = generate_synthetic(SyntheticKind::NoiseOnly, 2000, &[], 7).unwrap();
        let diff = stream.records()[1000].value - clean.records()[1000].value;
        // Spike replaces that record's noise draw, so compare against the
        // noiseless signal value instead.
        assert!(diff.abs() > 6.0 * params.noise_sigma);
        for i in [999usize, 1001] {
            assert_eq!(stream.records()[i].value, clean.records()[i].value);
        }
    }

    #[test]
    fn position_inside_probation_is_rejected() {
        let err = generate_synthetic(SyntheticKind::Spike, 1000, &[100], 7).unwrap_err();
        assert!(matches!(err, Error::InvalidConfig(_)));
    }

    #[test]
    fn frequency_change_doubles_oscillation_rate() {
        let params = SyntheticParams {
            noise_sigma: 1e-6,
            ..SyntheticParams::default()
        };
        let (stream, _) = generate_synthetic_named(
            "f.csv",
            SyntheticKind::FrequencyChange,
            2000,
            &[1000],
            5,
            &params,
        )
        .unwrap();
        let values: Vec<f64> = stream.values().collect();
        let crossings = |s: &[f64]| {
            s.windows(2)
                .filter(|w| (w[0] - params.offset).signum() != (w[1] - params.offset).signum())
                .count()
        };
        let before = crossings(&values[0..1000]);
        let after = crossings(&values[1000..2000]);
        assert!(
            after as f64 > 1.8 * before as f64,
            "crossings before={before} after={after}"
        );
    }
}
