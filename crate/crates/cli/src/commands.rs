//! One function per subcommand, mapping flags onto the library pipeline.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Subcommand};
use streambench::detectors::DetectorSpec;
use streambench::optimizer::{
    load_thresholds_file, optimize_threshold, write_thresholds_file, ScoredStream, ThresholdEntry,
    ThresholdFile,
};
use streambench::runner::{
    detect_to_disk, generate_corpus, load_corpus_results, render_scoreboard, renormalize_detector,
    run_pipeline, write_corpus_plotdata, write_run_artifacts, GenerateSpec, PipelineOptions,
    RunManifest, THRESHOLDS_FILE_NAME,
};
use streambench::scoring::{load_score_report, score_corpus, ScoreReport};
use streambench::{Error, Result};

use crate::common::{
    create, open, CorpusArgs, DetectorRunArgs, DetectorSelectArgs, ProfileArgs, WindowsByFile,
};

/// Whether every requested unit of work finished.
pub enum Outcome {
    Complete,
    /// Some files were skipped (failed detector runs); artifacts are
    /// labeled accordingly and the exit code is 3.
    Partial,
}

#[derive(Subcommand)]
pub enum Command {
    /// Synthesize a corpus (data CSVs, labels JSON, windows JSON) from a spec file
    Generate(GenerateCmd),
    /// Run detectors over a corpus and persist per-file score columns
    Detect(DetectCmd),
    /// Pick per-profile detection thresholds from persisted results
    Optimize(OptimizeCmd),
    /// Score persisted results at stored or fixed thresholds
    Score(ScoreCmd),
    /// Recompute normalized scores from persisted raw scores and windows
    Normalize(NormalizeCmd),
    /// Full pipeline: detect, optimize, score, report
    Run(RunCmd),
    /// Emit per-record plot tables for scored results
    Plotdata(PlotdataCmd),
}

impl Command {
    pub fn execute(self) -> Result<Outcome> {
        match self {
            Command::Generate(cmd) => generate(cmd),
            Command::Detect(cmd) => detect(cmd),
            Command::Optimize(cmd) => optimize(cmd),
            Command::Score(cmd) => score(cmd),
            Command::Normalize(cmd) => normalize(cmd),
            Command::Run(cmd) => run(cmd),
            Command::Plotdata(cmd) => plotdata(cmd),
        }
    }
}

#[derive(Args)]
pub struct GenerateCmd {
    /// Corpus spec JSON: `{"window_fraction"?, "files": [{name, kind,
    /// records, anomalies}]}`.
    #[arg(long, value_name = "FILE")]
    spec: PathBuf,
    /// Output corpus root; creates `data/`, `labels.json`, `windows.json`.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Master seed; each stream derives its own seed from it and its name.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn generate(cmd: GenerateCmd) -> Result<Outcome> {
    let spec = GenerateSpec::load(&cmd.spec)?;
    let generated = generate_corpus(&spec, &cmd.out, cmd.seed)?;
    println!(
        "wrote {} streams under {}",
        generated.streams.len(),
        generated.data_dir.display()
    );
    println!("labels:  {}", generated.labels_path.display());
    println!("windows: {}", generated.windows_path.display());
    Ok(Outcome::Complete)
}

#[derive(Args)]
pub struct DetectCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detectors: DetectorRunArgs,
    /// Results tree root; one subdirectory per detector.
    #[arg(long, value_name = "DIR")]
    results_dir: PathBuf,
    /// Seed for seeded detectors.
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn detect(cmd: DetectCmd) -> Result<Outcome> {
    let specs = cmd.detectors.gated_specs()?;
    let config = cmd.detectors.config()?;
    let corpus = cmd.corpus.load_corpus()?;
    let windows = cmd.corpus.load_windows(&corpus)?;
    if windows.is_none() && specs.iter().any(DetectorSpec::uses_ground_truth) {
        return Err(Error::InvalidConfig(
            "ground-truth detectors need windows; pass --windows or --labels".into(),
        ));
    }
    let label = cmd.corpus.data_dir.display().to_string();
    let mut partial = false;
    for spec in specs {
        let (outcome, _) = detect_to_disk(
            spec,
            &config,
            cmd.seed,
            &corpus,
            windows.as_ref(),
            &cmd.results_dir,
            &label,
            &[],
        )?;
        println!(
            "{spec}: {} files ok, {} failed",
            outcome.scores_by_file.len(),
            outcome.failures.len()
        );
        for (file, message) in &outcome.failures {
            eprintln!("  failed {file}: {message}");
        }
        partial |= !outcome.failures.is_empty();
    }
    Ok(if partial {
        Outcome::Partial
    } else {
        Outcome::Complete
    })
}

#[derive(Args)]
pub struct OptimizeCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detectors: DetectorSelectArgs,
    #[command(flatten)]
    profiles: ProfileArgs,
    /// Results tree root holding the persisted score columns.
    #[arg(long, value_name = "DIR")]
    results_dir: PathBuf,
}

fn optimize(cmd: OptimizeCmd) -> Result<Outcome> {
    let corpus = cmd.corpus.load_corpus()?;
    let windows = cmd.corpus.require_windows(&corpus)?;
    let profiles = cmd.profiles.load()?;
    let thresholds_path = cmd.results_dir.join(THRESHOLDS_FILE_NAME);
    // Update requested detectors in place, keeping any other entries.
    let mut thresholds: ThresholdFile = if thresholds_path.exists() {
        load_thresholds_file(open(&thresholds_path)?, &thresholds_path)?
    } else {
        ThresholdFile::new()
    };
    for spec in &cmd.detectors.detectors {
        let scores = load_corpus_results(&cmd.results_dir, &spec.dir_name(), &corpus)?;
        let streams = ScoredStream::collect(&corpus, &windows, &scores)?;
        let entry = thresholds.entry(spec.to_string()).or_default();
        for profile in &profiles {
            let result = optimize_threshold(&streams, profile)?;
            println!(
                "{spec} {}: threshold {} -> normalized {:.4} ({} candidates)",
                profile.name(),
                result.threshold,
                result.normalized,
                result.candidates_evaluated
            );
            entry.insert(profile.name().to_owned(), ThresholdEntry::from(result));
        }
    }
    write_thresholds_file(&thresholds, create(&thresholds_path)?)?;
    println!("thresholds: {}", thresholds_path.display());
    Ok(Outcome::Complete)
}

#[derive(Args)]
pub struct ScoreCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detectors: DetectorSelectArgs,
    #[command(flatten)]
    profiles: ProfileArgs,
    /// Results tree root holding the persisted score columns.
    #[arg(long, value_name = "DIR")]
    results_dir: PathBuf,
    /// Fixed detection threshold for every detector and profile, bypassing
    /// stored thresholds.
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
}

fn score(cmd: ScoreCmd) -> Result<Outcome> {
    let corpus = cmd.corpus.load_corpus()?;
    let windows = cmd.corpus.require_windows(&corpus)?;
    let profiles = cmd.profiles.load()?;
    let thresholds_path = cmd.results_dir.join(THRESHOLDS_FILE_NAME);
    let stored: ThresholdFile = match cmd.threshold {
        Some(_) => ThresholdFile::new(),
        None if thresholds_path.exists() => {
            load_thresholds_file(open(&thresholds_path)?, &thresholds_path)?
        }
        None => {
            return Err(Error::InvalidConfig(format!(
                "no {THRESHOLDS_FILE_NAME} under {}; run `optimize` first or pass --threshold",
                cmd.results_dir.display()
            )));
        }
    };

    let mut report = ScoreReport::default();
    for spec in &cmd.detectors.detectors {
        let display = spec.to_string();
        let scores = load_corpus_results(&cmd.results_dir, &spec.dir_name(), &corpus)?;
        let streams = ScoredStream::collect(&corpus, &windows, &scores)?;
        for profile in &profiles {
            let threshold = match cmd.threshold {
                Some(t) => t,
                None => stored
                    .get(&display)
                    .and_then(|m| m.get(profile.name()))
                    .map(|e| e.threshold)
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "no stored threshold for {display}/{}; run `optimize` first \
                             or pass --threshold",
                            profile.name()
                        ))
                    })?,
            };
            let detections: BTreeMap<String, Vec<usize>> = streams
                .iter()
                .map(|s| (s.name().to_owned(), s.detections_at(threshold)))
                .collect();
            let corpus_score = score_corpus(&corpus, &windows, &detections, profile)?;
            report.insert(&display, &corpus_score);
        }
    }
    write_run_artifacts(&cmd.results_dir, &report, &stored)?;
    let detector_names: Vec<String> = cmd
        .detectors
        .detectors
        .iter()
        .map(|d| d.to_string())
        .collect();
    let profile_names: Vec<String> = profiles.iter().map(|p| p.name().to_owned()).collect();
    print!(
        "{}",
        render_scoreboard(
            &report,
            &detector_names,
            &profile_names,
            &BTreeMap::new(),
            corpus.streams().len(),
        )
    );
    Ok(Outcome::Complete)
}

#[derive(Args)]
pub struct NormalizeCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    profiles: ProfileArgs,
    /// Results tree root holding `scores.json`.
    #[arg(long, value_name = "DIR")]
    results_dir: PathBuf,
}

fn normalize(cmd: NormalizeCmd) -> Result<Outcome> {
    let corpus = cmd.corpus.load_corpus()?;
    let windows = cmd.corpus.require_windows(&corpus)?;
    let profiles = cmd.profiles.load()?;
    let scores_path = cmd.results_dir.join(streambench::runner::SCORES_FILE_NAME);
    let mut report = load_score_report(open(&scores_path)?, &scores_path)?;

    for (display, detector_scores) in report.0.iter_mut() {
        // Partial runs were normalized against the surviving sub-corpus;
        // drop the failed files' windows to reproduce that baseline.
        let windows_used = match DetectorSpec::from_str(display)
            .ok()
            .and_then(|spec| RunManifest::load(&cmd.results_dir.join(spec.dir_name())).ok())
        {
            Some(manifest) if manifest.is_partial() => {
                let failed: Vec<String> = manifest
                    .failed_files()
                    .iter()
                    .map(|s| s.to_string())
                    .collect();
                filter_windows(&windows, &failed)
            }
            _ => windows.clone(),
        };
        renormalize_detector(display, detector_scores, &windows_used, &profiles)?;
    }

    write_run_artifacts(&cmd.results_dir, &report, &ThresholdFile::new())?;
    println!(
        "renormalized {} detectors in {}",
        report.0.len(),
        scores_path.display()
    );
    Ok(Outcome::Complete)
}

fn filter_windows(windows: &WindowsByFile, failed: &[String]) -> WindowsByFile {
    windows
        .iter()
        .filter(|(name, _)| !failed.contains(name))
        .map(|(name, ws)| (name.clone(), ws.clone()))
        .collect()
}

#[derive(Args)]
pub struct RunCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detectors: DetectorRunArgs,
    #[command(flatten)]
    profiles: ProfileArgs,
    /// Results tree root; detection, thresholds and scores land here.
    #[arg(long, value_name = "DIR")]
    results_dir: PathBuf,
    /// Seed for seeded detectors.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Fixed detection threshold, bypassing the optimizer.
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
    /// Reuse score columns already under --results-dir instead of running
    /// the detectors.
    #[arg(long)]
    from_results: bool,
}

fn run(cmd: RunCmd) -> Result<Outcome> {
    // Reusing persisted oracle results does not read the ground truth, so
    // the gate only applies when detectors actually execute.
    let specs = if cmd.from_results {
        cmd.detectors.detectors.clone()
    } else {
        cmd.detectors.gated_specs()?.to_vec()
    };
    let config = cmd.detectors.config()?;
    let corpus = cmd.corpus.load_corpus()?;
    let windows = cmd.corpus.require_windows(&corpus)?;
    let profiles = cmd.profiles.load()?;
    let options = PipelineOptions {
        detectors: specs,
        config,
        seed: cmd.seed,
        profiles,
        fixed_threshold: cmd.threshold,
        from_results: cmd.from_results,
        data_dir_label: cmd.corpus.data_dir.display().to_string(),
    };
    let output = run_pipeline(&corpus, &windows, &cmd.results_dir, &options)?;
    print!("{}", output.scoreboard);
    Ok(if output.is_partial() {
        Outcome::Partial
    } else {
        Outcome::Complete
    })
}

#[derive(Args)]
pub struct PlotdataCmd {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    detectors: DetectorSelectArgs,
    #[command(flatten)]
    profiles: ProfileArgs,
    /// Results tree root holding the persisted score columns.
    #[arg(long, value_name = "DIR")]
    results_dir: PathBuf,
    /// Profile whose weights and stored threshold drive the classification
    /// columns.
    #[arg(long, default_value = "standard", value_name = "NAME")]
    profile: String,
    /// Classification threshold; defaults to the stored optimized one.
    #[arg(long, value_name = "T")]
    threshold: Option<f64>,
}

fn plotdata(cmd: PlotdataCmd) -> Result<Outcome> {
    let corpus = cmd.corpus.load_corpus()?;
    let windows = cmd.corpus.require_windows(&corpus)?;
    let profiles = cmd.profiles.load()?;
    let profile = profiles
        .iter()
        .find(|p| p.name() == cmd.profile)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown profile `{}`", cmd.profile)))?;
    let thresholds_path = cmd.results_dir.join(THRESHOLDS_FILE_NAME);
    let stored: ThresholdFile = if cmd.threshold.is_none() && thresholds_path.exists() {
        load_thresholds_file(open(&thresholds_path)?, &thresholds_path)?
    } else {
        ThresholdFile::new()
    };
    for spec in &cmd.detectors.detectors {
        let display = spec.to_string();
        let threshold = match cmd.threshold {
            Some(t) => t,
            None => stored
                .get(&display)
                .and_then(|m| m.get(profile.name()))
                .map(|e| e.threshold)
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "no stored threshold for {display}/{}; run `optimize` first or \
                         pass --threshold",
                        profile.name()
                    ))
                })?,
        };
        let written = write_corpus_plotdata(
            &corpus,
            &windows,
            &cmd.results_dir,
            spec,
            threshold,
            profile,
        )?;
        println!(
            "{display}: {} plot files under {}",
            written.len(),
            cmd.results_dir
                .join(spec.dir_name())
                .join("plotdata")
                .display()
        );
    }
    Ok(Outcome::Complete)
}
