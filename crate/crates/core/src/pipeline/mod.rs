//! Curriculum training runs, the composite-weight ablation and the files a
//! run leaves behind.

mod ablation;
mod train;

pub use ablation::{run_alpha_ablation, write_ablation_csv, AblationRow, DEFAULT_ALPHAS, REFERENCE_CLAIM};
pub use train::{
    compute_epoch_difficulties, predict_all, read_trace_json, run_training, write_run_artifacts, write_trace_csv,
    EpochTrace, MetricsRecord, TrainingRun,
};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{load_dataset, Dataset, DatasetError};
use crate::hcd::{CompetenceSchedule, HcdError};
use crate::seqmodel::{ModelConfig, SeqError, Task};
use crate::synth::SynthDataset;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error(transparent)]
    Model(#[from] SeqError),
    #[error(transparent)]
    Curriculum(#[from] HcdError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn json(path: &Path, source: serde_json::Error) -> Self {
        PipelineError::Json {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        PipelineError::Csv {
            path: path.display().to_string(),
            source,
        }
    }
}

/// How the training subset is chosen each epoch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CurriculumMode {
    /// Composite difficulty below the competence.
    #[default]
    Hcd,
    /// Every sample, every epoch.
    None,
    /// Composite difficulty above one minus the competence.
    AntiHcd,
    /// Similarity difficulty only (alpha forced to 0).
    Static,
    /// Loss difficulty only (alpha forced to 1).
    Dynamic,
}

impl CurriculumMode {
    pub const ALL: [CurriculumMode; 5] = [
        CurriculumMode::Hcd,
        CurriculumMode::None,
        CurriculumMode::AntiHcd,
        CurriculumMode::Static,
        CurriculumMode::Dynamic,
    ];

    /// Composite weight actually used for a configured alpha.
    pub fn effective_alpha(self, alpha: f64) -> f64 {
        match self {
            CurriculumMode::Hcd | CurriculumMode::AntiHcd => alpha,
            CurriculumMode::None | CurriculumMode::Static => 0.0,
            CurriculumMode::Dynamic => 1.0,
        }
    }

    pub fn needs_losses(self) -> bool {
        matches!(self, CurriculumMode::Hcd | CurriculumMode::AntiHcd | CurriculumMode::Dynamic)
    }
}

impl fmt::Display for CurriculumMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CurriculumMode::Hcd => "hcd",
            CurriculumMode::None => "none",
            CurriculumMode::AntiHcd => "antihcd",
            CurriculumMode::Static => "static",
            CurriculumMode::Dynamic => "dynamic",
        })
    }
}

impl FromStr for CurriculumMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CurriculumMode::ALL
            .into_iter()
            .find(|m| m.to_string() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown mode {s:?} (expected hcd, none, antihcd, static or dynamic)"))
    }
}

/// Everything a training run needs besides the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub mode: CurriculumMode,
    /// Weight of the loss difficulty in the composite.
    pub alpha: f64,
    pub lambda_init: f64,
    /// Epoch at which competence reaches 1; half the epoch budget when absent.
    #[serde(rename = "T")]
    pub duration: Option<usize>,
    /// Selection floor; one batch when absent.
    pub min_selection: Option<usize>,
    /// Recompute loss difficulties every this many epochs.
    pub recompute_every: usize,
    pub tasks: Vec<Task>,
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            mode: CurriculumMode::Hcd,
            alpha: 0.8,
            lambda_init: 0.1,
            duration: None,
            min_selection: None,
            recompute_every: 1,
            tasks: Task::ALL.to_vec(),
            data: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn schedule(&self) -> Result<CompetenceSchedule, PipelineError> {
        let duration = self.duration.unwrap_or((self.model.epochs / 2).max(1));
        Ok(CompetenceSchedule::new(self.lambda_init, duration)?)
    }

    pub fn min_selection(&self) -> usize {
        self.min_selection.unwrap_or(self.model.batch_size)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.model.validate()?;
        self.schedule()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(PipelineError::Contract(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.min_selection == Some(0) || self.recompute_every == 0 {
            return Err(PipelineError::Contract("min_selection and recompute_every must be at least 1".into()));
        }
        if self.tasks.is_empty() {
            return Err(PipelineError::Contract("no evaluation tasks".into()));
        }
        for (name, path) in [("data", &self.data), ("out", &self.out)] {
            if path.as_ref().is_some_and(|p| p.as_os_str().is_empty()) {
                return Err(PipelineError::Contract(format!("{name} path is empty")));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| PipelineError::json(path, e))?;
        Ok(cfg)
    }
}

/// Train, dev and test data of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
}

impl Splits {
    /// Reads `train.jsonl`, `dev.jsonl` and `test.jsonl` from a directory.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let dir = dir.as_ref();
        Ok(Self {
            train: load_dataset(dir.join("train.jsonl"))?,
            dev: load_dataset(dir.join("dev.jsonl"))?,
            test: load_dataset(dir.join("test.jsonl"))?,
        })
    }
}

impl From<SynthDataset> for Splits {
    fn from(d: SynthDataset) -> Self {
        Self {
            train: d.train,
            dev: d.dev,
            test: d.test,
        }
    }
}
