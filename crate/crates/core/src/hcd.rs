//! Curriculum scheduling over noisy sentence–image pairs.
//!
//! Every training sample gets a static similarity difficulty (how poorly its
//! text and image embeddings agree), a per-epoch loss difficulty (its current
//! loss relative to the worst sample) and an affine mix of the two. A
//! square-root competence curve sets the admissible difficulty at each epoch.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{cosine, NumericsError};

/// Lower clamp applied to cosine similarities before normalisation.
pub const SIMILARITY_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HcdError {
    #[error("sample {index}: {source}")]
    Degenerate {
        index: usize,
        #[source]
        source: NumericsError,
    },
    #[error("contract violation: {0}")]
    Contract(String),
}

/// Per-sample difficulties, all in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifficultyRecord {
    pub sample_id: String,
    pub d_s: f64,
    pub d_l: f64,
    pub d_c: f64,
}

/// Parameters of the competence curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompetenceSchedule {
    pub lambda_init: f64,
    /// Epoch at which competence reaches 1.
    #[serde(rename = "T")]
    pub duration: usize,
}

impl CompetenceSchedule {
    pub fn new(lambda_init: f64, duration: usize) -> Result<Self, HcdError> {
        let s = Self { lambda_init, duration };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), HcdError> {
        if !(self.lambda_init > 0.0 && self.lambda_init <= 1.0) {
            return Err(HcdError::Contract(format!(
                "lambda_init must lie in (0, 1], got {}",
                self.lambda_init
            )));
        }
        if self.duration == 0 {
            return Err(HcdError::Contract("T must be at least 1".into()));
        }
        Ok(())
    }
}

/// `d_s,i = 1 − S_i / max_k S_k` with `S_i` the clamped cosine between the
/// i-th text and image embeddings.
pub fn similarity_difficulty<T, I>(text_embeds: &[T], image_embeds: &[I]) -> Result<Vec<f64>, HcdError>
where
    T: AsRef<[f64]>,
    I: AsRef<[f64]>,
{
    if text_embeds.is_empty() || text_embeds.len() != image_embeds.len() {
        return Err(HcdError::Contract(format!(
            "need equal nonempty embedding lists, got {} and {}",
            text_embeds.len(),
            image_embeds.len()
        )));
    }
    let sims = text_embeds
        .iter()
        .zip(image_embeds)
        .enumerate()
        .map(|(index, (t, i))| {
            cosine(t.as_ref(), i.as_ref())
                .map(|s| s.clamp(SIMILARITY_FLOOR, 1.0))
                .map_err(|source| HcdError::Degenerate { index, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(normalize_similarities(&sims))
}

/// The normalisation step of [`similarity_difficulty`] on already-clamped
/// similarities.
pub fn normalize_similarities(sims: &[f64]) -> Vec<f64> {
    let max = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    sims.iter().map(|s| 1.0 - s / max).collect()
}

/// `d_l,i = L_i / max_j L_j`; all zeros when every loss is zero.
pub fn loss_difficulty(losses: &[f64]) -> Result<Vec<f64>, HcdError> {
    if let Some((i, l)) = losses.iter().enumerate().find(|(_, l)| !(**l >= 0.0)) {
        return Err(HcdError::Contract(format!("loss {i} is {l}, expected a finite non-negative value")));
    }
    let max = losses.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Ok(vec![0.0; losses.len()]);
    }
    Ok(losses.iter().map(|l| l / max).collect())
}

/// `d_c,i = α·d_l,i + (1 − α)·d_s,i`.
pub fn composite_difficulty(d_l: &[f64], d_s: &[f64], alpha: f64) -> Result<Vec<f64>, HcdError> {
    if d_l.len() != d_s.len() {
        return Err(HcdError::Contract(format!(
            "d_l has {} entries but d_s has {}",
            d_l.len(),
            d_s.len()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(HcdError::Contract(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    Ok(d_l.iter().zip(d_s).map(|(l, s)| alpha * l + (1.0 - alpha) * s).collect())
}

/// `p(t) = sqrt(t/T·(1 − λ²) + λ²)` up to `T`, then 1.
pub fn competence(t: usize, sched: &CompetenceSchedule) -> f64 {
    if t >= sched.duration {
        return 1.0;
    }
    let l2 = sched.lambda_init * sched.lambda_init;
    (t as f64 / sched.duration as f64 * (1.0 - l2) + l2).sqrt()
}

/// Indices with `d_c < p`, ascending. When fewer than `min_size` qualify the
/// `min_size` easiest samples are returned instead (ties by ascending id);
/// `p ≥ 1` admits everything.
pub fn select_training_subset(records: &[DifficultyRecord], p: f64, min_size: usize) -> Vec<usize> {
    if p >= 1.0 {
        return (0..records.len()).collect();
    }
    let chosen: Vec<usize> = (0..records.len()).filter(|&i| records[i].d_c < p).collect();
    if chosen.len() >= min_size {
        return chosen;
    }
    lowest_by(records, min_size, |a, b| a.d_c.total_cmp(&b.d_c))
}

/// Reverse curriculum: indices with `d_c > 1 − p`, falling back to the
/// `min_size` hardest samples.
pub fn select_hardest_subset(records: &[DifficultyRecord], p: f64, min_size: usize) -> Vec<usize> {
    if p >= 1.0 {
        return (0..records.len()).collect();
    }
    let chosen: Vec<usize> = (0..records.len()).filter(|&i| records[i].d_c > 1.0 - p).collect();
    if chosen.len() >= min_size {
        return chosen;
    }
    lowest_by(records, min_size, |a, b| b.d_c.total_cmp(&a.d_c))
}

fn lowest_by(
    records: &[DifficultyRecord],
    k: usize,
    order: impl Fn(&DifficultyRecord, &DifficultyRecord) -> Ordering,
) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..records.len()).collect();
    idx.sort_by(|&a, &b| order(&records[a], &records[b]).then_with(|| records[a].sample_id.cmp(&records[b].sample_id)));
    idx.truncate(k.min(records.len()));
    idx.sort_unstable();
    idx
}

/// Assembles records from parallel difficulty lists.
pub fn build_records(ids: &[String], d_s: &[f64], d_l: &[f64], alpha: f64) -> Result<Vec<DifficultyRecord>, HcdError> {
    if ids.len() != d_s.len() {
        return Err(HcdError::Contract(format!("{} ids but {} difficulties", ids.len(), d_s.len())));
    }
    let d_c = composite_difficulty(d_l, d_s, alpha)?;
    Ok(ids
        .iter()
        .zip(d_s)
        .zip(d_l)
        .zip(d_c)
        .map(|(((id, &s), &l), c)| DifficultyRecord {
            sample_id: id.clone(),
            d_s: s,
            d_l: l,
            d_c: c,
        })
        .collect())
}
