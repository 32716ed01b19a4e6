use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run_training, PipelineError, RunConfig, Splits};
use crate::seqmodel::Task;

pub const DEFAULT_ALPHAS: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];

/// Documentation line for the ablation header; never checked.
pub const REFERENCE_CLAIM: &str =
    "reference claim (full-scale benchmark, documentation only): alpha = 0.8 achieves the highest F1-score of 67.1";

/// One (alpha, seed) cell of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub alpha: f64,
    pub seed: u64,
    pub dev_f1: f64,
    pub test_f1: f64,
}

/// Trains once per (alpha, seed) pair, alphas outermost.
pub fn run_alpha_ablation(
    base: &RunConfig,
    splits: &Splits,
    alphas: &[f64],
    seeds: &[u64],
) -> Result<Vec<AblationRow>, PipelineError> {
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(PipelineError::Contract(format!("alpha {a} outside [0, 1]")));
    }
    let mut rows = Vec::with_capacity(alphas.len() * seeds.len());
    for &alpha in alphas {
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.alpha = alpha;
            cfg.model.seed = seed;
            let run = run_training(&cfg, splits)?;
            let f1 = |split| run.metric(split, Task::Jmasa).map_or(f64::NAN, |m| m.f1);
            rows.push(AblationRow {
                alpha,
                seed,
                dev_f1: f1("dev"),
                test_f1: f1("test"),
            });
        }
    }
    Ok(rows)
}

/// Grid CSV preceded by `#` comment lines.
pub fn write_ablation_csv(rows: &[AblationRow], base: &RunConfig, path: impl AsRef<Path>) -> Result<(), PipelineError> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let header = format!(
        "# {REFERENCE_CLAIM}\n# mode={} epochs={} hidden={} metric=JMASA F1\n",
        base.mode, base.model.epochs, base.model.hidden
    );
    file.write_all(header.as_bytes()).map_err(|e| PipelineError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for row in rows {
        w.serialize(row).map_err(|e| PipelineError::csv(path, e))?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}
