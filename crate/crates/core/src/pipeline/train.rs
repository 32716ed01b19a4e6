use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CurriculumMode, PipelineError, RunConfig, Splits};
use crate::datamodel::{Dataset, MultimodalSample};
use crate::hcd::{
    build_records, competence, loss_difficulty, select_hardest_subset, select_training_subset,
    similarity_difficulty, DifficultyRecord,
};
use crate::seqmodel::{evaluate, MetricsReport, Model, Prediction, Task, Vocab};

/// One row of the curriculum trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub epoch: usize,
    pub p: f64,
    pub selected: usize,
    pub mean_ds_selected: f64,
    pub mean_dc_selected: f64,
    /// Mean pre-update loss over the selected samples.
    pub train_loss: f64,
    /// JMASA F1 on dev after the epoch.
    pub dev_f1: f64,
}

/// A metrics report tagged with the split it was computed on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub split: String,
    #[serde(flatten)]
    pub report: MetricsReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRun {
    pub model: Model,
    pub trace: Vec<EpochTrace>,
    pub metrics: Vec<MetricsRecord>,
    /// Similarity difficulty of every train sample, in train order.
    pub d_s: Vec<f64>,
    /// Indices selected in each epoch.
    pub selections: Vec<Vec<usize>>,
}

impl TrainingRun {
    pub fn mean_ds(&self) -> f64 {
        mean(self.d_s.iter().copied())
    }

    pub fn metric(&self, split: &str, task: Task) -> Option<&MetricsReport> {
        self.metrics
            .iter()
            .find(|m| m.split == split && m.report.task == task)
            .map(|m| &m.report)
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Loss difficulties from a no-update pass over `dataset`, combined with
/// `d_s` at weight `alpha`.
pub fn compute_epoch_difficulties(
    model: &Model,
    dataset: &Dataset,
    d_s: &[f64],
    alpha: f64,
) -> Result<Vec<DifficultyRecord>, PipelineError> {
    if d_s.len() != dataset.len() {
        return Err(PipelineError::Contract(format!(
            "{} similarity difficulties for {} samples",
            d_s.len(),
            dataset.len()
        )));
    }
    let losses: Vec<f64> = dataset
        .samples
        .par_iter()
        .map(|s| model.sequence_loss(s))
        .collect::<Result<_, _>>()?;
    let d_l = loss_difficulty(&losses)?;
    let ids: Vec<String> = dataset.iter().map(|s| s.id.clone()).collect();
    Ok(build_records(&ids, d_s, &d_l, alpha)?)
}

pub fn predict_all(model: &Model, dataset: &Dataset) -> Result<Vec<Prediction>, PipelineError> {
    let preds = dataset
        .samples
        .par_iter()
        .map(|s| {
            Ok(Prediction {
                id: s.id.clone(),
                aspects: model.predict(s)?,
            })
        })
        .collect::<Result<_, PipelineError>>()?;
    Ok(preds)
}

fn epoch_rng(seed: u64, epoch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch as u64 + 1);
    rng
}

/// Trains with the configured curriculum, then evaluates on dev and test.
pub fn run_training(cfg: &RunConfig, splits: &Splits) -> Result<TrainingRun, PipelineError> {
    cfg.validate()?;
    let train = &splits.train;
    if train.is_empty() || splits.dev.is_empty() {
        return Err(PipelineError::Contract("train and dev splits must be nonempty".into()));
    }
    for d in [train, &splits.dev, &splits.test] {
        d.check_consistency()?;
    }
    let d_img = train.dims().map(|(d, _)| d).unwrap_or_default();
    let mut model = Model::new(cfg.model.clone(), Vocab::build(train), d_img)?;
    let schedule = cfg.schedule()?;
    let alpha = cfg.mode.effective_alpha(cfg.alpha);
    let min_size = cfg.min_selection().min(train.len());

    let text: Vec<&[f64]> = train.iter().map(|s| s.text_embed.as_slice()).collect();
    let image: Vec<&[f64]> = train.iter().map(|s| s.image_embed.as_slice()).collect();
    let d_s = similarity_difficulty(&text, &image)?;
    let ids: Vec<String> = train.iter().map(|s| s.id.clone()).collect();
    let mut records = build_records(&ids, &d_s, &vec![0.0; d_s.len()], alpha)?;

    let mut trace = Vec::with_capacity(cfg.model.epochs);
    let mut selections = Vec::with_capacity(cfg.model.epochs);
    for epoch in 0..cfg.model.epochs {
        if cfg.mode.needs_losses() && epoch % cfg.recompute_every == 0 {
            records = compute_epoch_difficulties(&model, train, &d_s, alpha)?;
        }
        let p = competence(epoch, &schedule);
        let selected = match cfg.mode {
            CurriculumMode::None => (0..train.len()).collect(),
            CurriculumMode::AntiHcd => select_hardest_subset(&records, p, min_size),
            _ => select_training_subset(&records, p, min_size),
        };

        let mut order = selected.clone();
        order.shuffle(&mut epoch_rng(cfg.model.seed, epoch));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.model.batch_size) {
            let batch: Vec<&MultimodalSample> = chunk.iter().map(|&i| &train.samples[i]).collect();
            let (loss, grad) = model.batch_loss_and_grad(&batch)?;
            loss_sum += loss * chunk.len() as f64;
            model.sgd_step(&grad);
        }
        if !model.params.is_finite() {
            return Err(PipelineError::Contract(format!(
                "parameters became non-finite in epoch {epoch}; lower the learning rate"
            )));
        }

        let dev_preds = predict_all(&model, &splits.dev)?;
        let dev_f1 = evaluate(&splits.dev, &dev_preds, Task::Jmasa)?.f1;
        trace.push(EpochTrace {
            epoch,
            p,
            selected: selected.len(),
            mean_ds_selected: mean(selected.iter().map(|&i| records[i].d_s)),
            mean_dc_selected: mean(selected.iter().map(|&i| records[i].d_c)),
            train_loss: loss_sum / selected.len() as f64,
            dev_f1,
        });
        selections.push(selected);
    }

    let mut metrics = Vec::new();
    for (split, data) in [("dev", &splits.dev), ("test", &splits.test)] {
        if data.is_empty() {
            continue;
        }
        let preds = predict_all(&model, data)?;
        for &task in &cfg.tasks {
            metrics.push(MetricsRecord {
                split: split.into(),
                report: evaluate(data, &preds, task)?,
            });
        }
    }
    Ok(TrainingRun {
        model,
        trace,
        metrics,
        d_s,
        selections,
    })
}

pub fn write_trace_csv<W: Write>(trace: &[EpochTrace], writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for row in trace {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct RunRecord {
    config: RunConfig,
    trace: Vec<EpochTrace>,
}

/// Writes `trace.csv`, `metrics.jsonl`, `model.json` and `run.json`.
pub fn write_run_artifacts(run: &TrainingRun, cfg: &RunConfig, dir: impl AsRef<Path>) -> Result<(), PipelineError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;

    let path = dir.join("trace.csv");
    let file = fs::File::create(&path).map_err(|e| PipelineError::io(&path, e))?;
    write_trace_csv(&run.trace, file).map_err(|e| PipelineError::csv(&path, e))?;

    let path = dir.join("metrics.jsonl");
    let mut lines = String::new();
    for m in &run.metrics {
        lines.push_str(&serde_json::to_string(m).map_err(|e| PipelineError::json(&path, e))?);
        lines.push('\n');
    }
    fs::write(&path, lines).map_err(|e| PipelineError::io(&path, e))?;

    let path = dir.join("model.json");
    let text = serde_json::to_string(&run.model).map_err(|e| PipelineError::json(&path, e))?;
    fs::write(&path, text).map_err(|e| PipelineError::io(&path, e))?;

    let path = dir.join("run.json");
    let record = RunRecord {
        config: cfg.clone(),
        trace: run.trace.clone(),
    };
    let text = serde_json::to_string_pretty(&record).map_err(|e| PipelineError::json(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| PipelineError::io(&path, e))
}

/// The trace stored in a run directory's `run.json`.
pub fn read_trace_json(dir: impl AsRef<Path>) -> Result<Vec<EpochTrace>, PipelineError> {
    let path = dir.as_ref().join("run.json");
    let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
    let record: RunRecord = serde_json::from_str(&text).map_err(|e| PipelineError::json(&path, e))?;
    Ok(record.trace)
}
