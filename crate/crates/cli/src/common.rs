//! Argument groups and loading helpers shared across subcommands.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::Args;
use streambench::corpus::{
    load_labels_file, load_windows_file, resolve_windows, AnomalyWindow, Corpus, WindowConfig,
    DEFAULT_WINDOW_FRACTION,
};
use streambench::detectors::{DetectorConfig, DetectorSpec};
use streambench::scoring::{load_profiles_file, ApplicationProfile};
use streambench::{Error, Result};

pub type WindowsByFile = BTreeMap<String, Vec<AnomalyWindow>>;

/// Size the global worker pool before any parallel work starts.
#[cfg(feature = "parallel")]
pub fn init_workers(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("could not size the worker pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
pub fn init_workers(workers: Option<usize>) -> Result<()> {
    if workers.is_some_and(|n| n != 1) {
        eprintln!("note: built without the parallel feature; --workers is ignored");
    }
    Ok(())
}

pub fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Where the input corpus and its ground truth come from.
#[derive(Args, Debug)]
pub struct CorpusArgs {
    /// Directory of input CSV streams (`timestamp,value` per row).
    #[arg(long, value_name = "DIR")]
    pub data_dir: PathBuf,
    /// Combined anomaly-windows JSON; takes precedence over --labels.
    #[arg(long, value_name = "FILE")]
    pub windows: Option<PathBuf>,
    /// Combined ground-truth labels JSON; windows are derived from it with
    /// the window-budget rule.
    #[arg(long, value_name = "FILE")]
    pub labels: Option<PathBuf>,
    /// Fraction of each file's length shared among its windows when
    /// deriving windows from labels.
    #[arg(long, value_name = "FRACTION", default_value_t = DEFAULT_WINDOW_FRACTION)]
    pub window_fraction: f64,
}

impl CorpusArgs {
    pub fn load_corpus(&self) -> Result<Corpus> {
        Corpus::load(&self.data_dir, None)
    }

    /// Ground-truth windows for `corpus`, if a source was given. Streams
    /// absent from the windows file count as window-free (false-positive
    /// traps); names that match no stream are rejected as typos.
    pub fn load_windows(&self, corpus: &Corpus) -> Result<Option<WindowsByFile>> {
        if let Some(path) = &self.windows {
            let pairs = load_windows_file(open(path)?, path)?;
            for name in pairs.keys() {
                if corpus.stream(name).is_none() {
                    return Err(Error::MissingFile(format!(
                        "windows file references unknown stream `{name}`"
                    )));
                }
            }
            let mut out = BTreeMap::new();
            for stream in corpus.streams() {
                let ws = match pairs.get(stream.name()) {
                    Some(p) => resolve_windows(stream, p)?,
                    None => Vec::new(),
                };
                out.insert(stream.name().to_owned(), ws);
            }
            return Ok(Some(out));
        }
        if let Some(path) = &self.labels {
            let labels = load_labels_file(open(path)?, path)?;
            let config = WindowConfig {
                fraction: self.window_fraction,
            };
            return Ok(Some(corpus.windows_from_labels(&labels, &config)?));
        }
        Ok(None)
    }

    pub fn require_windows(&self, corpus: &Corpus) -> Result<WindowsByFile> {
        self.load_windows(corpus)?.ok_or_else(|| {
            Error::InvalidConfig(
                "this command needs ground truth; pass --windows or --labels".into(),
            )
        })
    }
}

fn parse_detector(s: &str) -> std::result::Result<DetectorSpec, String> {
    DetectorSpec::from_str(s).map_err(|e| e.to_string())
}

/// Detector selection for commands that execute detectors.
#[derive(Args, Debug)]
pub struct DetectorRunArgs {
    /// Detector selector (repeatable): null, random, oracle,
    /// windowed_gaussian, skyline, anomaly_likelihood(<inner>) or
    /// external:<command>.
    #[arg(long = "detector", value_name = "SPEC", value_parser = parse_detector, required = true)]
    pub detectors: Vec<DetectorSpec>,
    /// Detector tuning parameters, as a JSON file.
    #[arg(long, value_name = "FILE")]
    pub detector_config: Option<PathBuf>,
    /// Permit detectors that read the ground truth (oracle).
    #[arg(long)]
    pub allow_oracle: bool,
}

impl DetectorRunArgs {
    /// The selected detectors, refusing ground-truth readers unless
    /// explicitly allowed.
    pub fn gated_specs(&self) -> Result<&[DetectorSpec]> {
        for spec in &self.detectors {
            if spec.uses_ground_truth() && !self.allow_oracle {
                return Err(Error::InvalidConfig(format!(
                    "detector `{spec}` reads the ground truth; pass --allow-oracle to run it"
                )));
            }
        }
        Ok(&self.detectors)
    }

    pub fn config(&self) -> Result<DetectorConfig> {
        match &self.detector_config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                DetectorConfig::from_json(&text)
            }
            None => Ok(DetectorConfig::default()),
        }
    }
}

/// Detector selection for commands that only read persisted results.
#[derive(Args, Debug)]
pub struct DetectorSelectArgs {
    /// Detector whose persisted results to use (repeatable).
    #[arg(long = "detector", value_name = "SPEC", value_parser = parse_detector, required = true)]
    pub detectors: Vec<DetectorSpec>,
}

#[derive(Args, Debug)]
pub struct ProfileArgs {
    /// Application-profile definitions as a JSON file
    /// (`{name: {tp, fp, fn, tn}}`); defaults to the three built-ins.
    #[arg(long, value_name = "FILE")]
    pub profiles: Option<PathBuf>,
}

impl ProfileArgs {
    pub fn load(&self) -> Result<Vec<ApplicationProfile>> {
        match &self.profiles {
            Some(path) => load_profiles_file(open(path)?, path),
            None => Ok(ApplicationProfile::defaults()),
        }
    }
}
