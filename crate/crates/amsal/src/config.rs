//! Flat `key = value` pipeline configuration. `#` starts a comment; relative
//! paths resolve against the directory of the file that names them.

use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use amsal_core::{AmsalConfig, RemovalRank, ScoreK};

use crate::error::{Error, Result};
use crate::format::MatrixFormat;

/// How the guarded file is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ZMode {
    /// One row per unique record; priors come from `priors` (uniform if unset).
    #[default]
    Records,
    /// A bag of guarded samples, deduplicated with empirical priors.
    Samples,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aligner {
    #[default]
    Amsal,
    Kmeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Sal,
    Inlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Task {
    #[default]
    Classification,
    Regression,
}

macro_rules! keyword_enum {
    ($ty:ty { $($word:literal => $variant:expr),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($word => Ok($variant),)+
                    _ => Err(format!("expected one of: {}", [$($word),+].join(", "))),
                }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let word = [$(($variant, $word)),+].into_iter().find(|(v, _)| v == self).map(|(_, w)| w);
                f.write_str(word.expect("every variant has a keyword"))
            }
        }
    };
}

keyword_enum!(ZMode { "records" => ZMode::Records, "samples" => ZMode::Samples });
keyword_enum!(Aligner { "amsal" => Aligner::Amsal, "kmeans" => Aligner::Kmeans });
keyword_enum!(Backend { "sal" => Backend::Sal, "inlp" => Backend::Inlp });
keyword_enum!(Task { "classification" => Task::Classification, "regression" => Task::Regression });

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub x: Option<PathBuf>,
    pub z: Option<PathBuf>,
    pub z_mode: ZMode,
    pub priors: Option<Vec<f64>>,
    /// Task targets: class ids or real values depending on `task`.
    pub y: Option<PathBuf>,
    pub task: Task,
    /// Seed set of `(input, record)` pairs for partial selection.
    pub labels: Option<PathBuf>,
    /// Known alignment, for reporting only.
    pub truth: Option<PathBuf>,
    /// Per-input group ids for fairness metrics; defaults to truth, then to
    /// the recovered alignment.
    pub groups: Option<PathBuf>,
    /// Precomputed alignment for the `erase` and `eval` stages.
    pub assignment: Option<PathBuf>,
    /// Fitted eraser to apply instead of fitting one.
    pub eraser: Option<PathBuf>,
    pub aligner: Aligner,
    pub amsal: AmsalConfig,
    pub partial: bool,
    pub backend: Backend,
    pub rank: RemovalRank,
    pub inlp_rounds: usize,
    pub reduced: bool,
    /// Held-out fraction for the task probe; 0 trains and tests on all rows.
    pub test_fraction: f64,
    pub format: MatrixFormat,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            x: None,
            z: None,
            z_mode: ZMode::default(),
            priors: None,
            y: None,
            task: Task::default(),
            labels: None,
            truth: None,
            groups: None,
            assignment: None,
            eraser: None,
            aligner: Aligner::default(),
            amsal: AmsalConfig::default(),
            partial: false,
            backend: Backend::default(),
            rank: RemovalRank::Auto,
            inlp_rounds: 20,
            reduced: false,
            test_fraction: 0.3,
            format: MatrixFormat::Bin,
            out: PathBuf::from("out"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "x", "z", "z_mode", "priors", "y", "task", "labels", "truth", "groups", "assignment", "eraser", "aligner",
    "iterations", "seeds", "slack", "score_k", "selection", "seed", "backend", "rank", "inlp_rounds", "reduced",
    "test_fraction", "format", "out",
];

fn parse<T: FromStr>(value: &str) -> std::result::Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| format!("`{value}`: {e}"))
}

fn parse_bool(value: &str) -> std::result::Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("`{value}` is not a boolean")),
    }
}

impl PipelineConfig {
    /// Parses a whole file's text; `base` anchors relative paths.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config { line: line_no, key: line.to_string(), message: "expected key = value".into() });
            };
            let key = key.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::Config { line: line_no, key: key.into(), message: "duplicate key".into() });
            }
            seen.push(key.to_string());
            cfg.set(key, value.trim(), base, line_no)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    /// Applies one setting; `line` is reported in errors (0 for overrides).
    pub fn set(&mut self, key: &str, value: &str, base: &Path, line: usize) -> Result<()> {
        let path = || Some(base.join(value));
        let outcome: std::result::Result<(), String> = (|| {
            match key {
                "x" => self.x = path(),
                "z" => self.z = path(),
                "y" => self.y = path(),
                "labels" => self.labels = path(),
                "truth" => self.truth = path(),
                "groups" => self.groups = path(),
                "assignment" => self.assignment = path(),
                "eraser" => self.eraser = path(),
                "out" => self.out = base.join(value),
                "z_mode" => self.z_mode = parse(value)?,
                "task" => self.task = parse(value)?,
                "aligner" => self.aligner = parse(value)?,
                "backend" => self.backend = parse(value)?,
                "format" => self.format = parse(value)?,
                "priors" => {
                    let p = value.split(',').map(|v| parse::<f64>(v.trim())).collect::<std::result::Result<Vec<_>, _>>()?;
                    self.priors = Some(p);
                }
                "iterations" => self.amsal.max_iterations = parse(value)?,
                "seeds" => self.amsal.num_seeds = parse(value)?,
                "slack" => self.amsal.slack = parse(value)?,
                "seed" => self.amsal.rng_seed = parse(value)?,
                "score_k" => {
                    self.amsal.score_k = match value {
                        "full" => ScoreK::Full,
                        v => ScoreK::Top(parse(v)?),
                    }
                }
                "selection" => {
                    self.partial = match value {
                        "unsupervised" => false,
                        "partial" => true,
                        _ => return Err("expected unsupervised or partial".into()),
                    }
                }
                "rank" => {
                    self.rank = match value {
                        "auto" => RemovalRank::Auto,
                        v => RemovalRank::Fixed(parse(v)?),
                    }
                }
                "inlp_rounds" => self.inlp_rounds = parse(value)?,
                "reduced" => self.reduced = parse_bool(value)?,
                "test_fraction" => self.test_fraction = parse(value)?,
                _ => return Err(format!("unknown key (known: {})", KEYS.join(", "))),
            }
            Ok(())
        })();
        outcome.map_err(|message| Error::Config { line, key: key.into(), message })
    }

    /// Checks that do not need any file contents.
    pub fn validate(&self) -> Result<()> {
        if self.partial && self.labels.is_none() {
            return Err(Error::invalid("selection = partial needs a `labels` file"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(Error::invalid(format!("test_fraction {} outside [0, 1)", self.test_fraction)));
        }
        if let Some(p) = &self.priors {
            if self.z_mode == ZMode::Samples {
                return Err(Error::invalid("priors are derived from the samples when z_mode = samples"));
            }
            if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid("priors must be finite and non-negative"));
            }
        }
        let mut amsal = self.amsal.clone();
        if self.partial {
            // labels are only known after loading
            amsal.selection = amsal_core::Selection::Partial(vec![(0, 0)]);
        }
        amsal.validate()?;
        Ok(())
    }

    /// Fails on the first referenced file that does not exist.
    pub fn check_files(&self) -> Result<()> {
        let named = [
            ("x", &self.x),
            ("z", &self.z),
            ("y", &self.y),
            ("labels", &self.labels),
            ("truth", &self.truth),
            ("groups", &self.groups),
            ("assignment", &self.assignment),
            ("eraser", &self.eraser),
        ];
        for (key, path) in named {
            if let Some(p) = path.as_deref().filter(|p| !p.is_file()) {
                let source = io::Error::new(io::ErrorKind::NotFound, format!("`{key}` file does not exist"));
                return Err(Error::io(p, source));
            }
        }
        Ok(())
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
        path.as_deref().ok_or_else(|| Error::invalid(format!("`{key}` is required for this stage")))
    }
}
