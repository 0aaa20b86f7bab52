//! Parallel vs sequential throughput for the heavy pipeline stages:
//! per-stream detection, per-stream scoring, and the threshold sweep.
//!
//! `par::map` distributes across the thread pool when the `parallel`
//! feature is on; `par::map_seq` is the always-available sequential path.
//! Comparing the two on the same inputs shows the speedup (build with
//! `--no-default-features` to confirm both collapse to the same path).

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::hint::black_box;
use streambench::corpus::{generate_synthetic, AnomalyWindow, Corpus, SyntheticKind};
use streambench::detectors::{DetectorConfig, DetectorSpec};
use streambench::optimizer::{optimize_threshold, ScoredStream};
use streambench::runner::detect_stream;
use streambench::scoring::{score_file, ApplicationProfile};
use streambench::{par, scoring};

const STREAMS: usize = 8;
const RECORDS: usize = 5_000;

fn corpus_with_windows() -> (Corpus, BTreeMap<String, Vec<AnomalyWindow>>) {
    let mut streams = Vec::new();
    let mut windows = BTreeMap::new();
    for seed in 0..STREAMS as u64 {
        let positions = [RECORDS / 3, RECORDS / 2, 4 * RECORDS / 5];
        let (stream, labels) =
            generate_synthetic(SyntheticKind::Spike, RECORDS, &positions, seed).unwrap();
        let ws = streambench::corpus::make_windows(&stream, &labels).unwrap();
        windows.insert(stream.name().to_owned(), ws);
        streams.push(stream);
    }
    (Corpus::from_streams(streams).unwrap(), windows)
}

fn random_scores(corpus: &Corpus) -> BTreeMap<String, Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    corpus
        .streams()
        .iter()
        .map(|s| {
            let scores = (0..s.len()).map(|_| rng.random::<f64>()).collect();
            (s.name().to_owned(), scores)
        })
        .collect()
}

fn bench_detection(c: &mut Criterion) {
    let (corpus, _) = corpus_with_windows();
    let spec = DetectorSpec::WindowedGaussian;
    let config = DetectorConfig::default();
    let mut group = c.benchmark_group("detect_windowed_gaussian");
    group.sample_size(10);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let jobs: Vec<_> = corpus.streams().iter().collect();
            black_box(par::map(jobs, |s| {
                detect_stream(&spec, &config, 1, s, None).unwrap()
            }))
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let jobs: Vec<_> = corpus.streams().iter().collect();
            black_box(par::map_seq(jobs, |s| {
                detect_stream(&spec, &config, 1, s, None).unwrap()
            }))
        })
    });
    group.finish();
}

fn bench_scoring(c: &mut Criterion) {
    let (corpus, windows) = corpus_with_windows();
    let scores = random_scores(&corpus);
    let profile = ApplicationProfile::standard();
    let streams = ScoredStream::collect(&corpus, &windows, &scores).unwrap();
    // One prepared scoring job per stream: name, detections, window spans,
    // probation end and record count.
    type ScoreJob = (String, Vec<usize>, Vec<scoring::WindowSpan>, usize, usize);
    let detections: Vec<ScoreJob> = streams
        .iter()
        .map(|s| {
            let detections = s.detections_at(0.99);
            let stream = corpus.stream(s.name()).unwrap();
            let spans = windows[s.name()].iter().map(AnomalyWindow::span).collect();
            (
                s.name().to_owned(),
                detections,
                spans,
                stream.probation_end_index(),
                stream.len(),
            )
        })
        .collect();

    let mut group = c.benchmark_group("score_corpus");
    group.sample_size(20);
    group.bench_function("parallel", |b| {
        b.iter(|| {
            let jobs: Vec<_> = detections.iter().collect();
            black_box(par::map(jobs, |(name, det, spans, probation, len)| {
                score_file(name, det, spans, *probation, *len, &profile).unwrap()
            }))
        })
    });
    group.bench_function("sequential", |b| {
        b.iter(|| {
            let jobs: Vec<_> = detections.iter().collect();
            black_box(par::map_seq(jobs, |(name, det, spans, probation, len)| {
                score_file(name, det, spans, *probation, *len, &profile).unwrap()
            }))
        })
    });
    group.finish();
}

fn bench_optimizer(c: &mut Criterion) {
    let (corpus, windows) = corpus_with_windows();
    let scores = random_scores(&corpus);
    let streams = ScoredStream::collect(&corpus, &windows, &scores).unwrap();
    let profile = ApplicationProfile::standard();
    let mut group = c.benchmark_group("optimize_threshold");
    group.sample_size(10);
    group.bench_function("sweep", |b| {
        b.iter(|| black_box(optimize_threshold(&streams, &profile).unwrap()))
    });
    group.finish();
}

criterion_group!(benches, bench_detection, bench_scoring, bench_optimizer);
criterion_main!(benches);
