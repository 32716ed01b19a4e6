//! Span-level evaluation: joint extraction (JMASA), term extraction (MATE)
//! and polarity classification of gold spans (MASC).

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SeqError;
use crate::datamodel::{AspectAnnotation, Dataset, Polarity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Task {
    Jmasa,
    Mate,
    Masc,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Jmasa, Task::Mate, Task::Masc];
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Jmasa => "JMASA",
            Task::Mate => "MATE",
            Task::Masc => "MASC",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "JMASA" => Ok(Task::Jmasa),
            "MATE" => Ok(Task::Mate),
            "MASC" => Ok(Task::Masc),
            _ => Err(format!("unknown task {s:?} (expected JMASA, MATE or MASC)")),
        }
    }
}

/// Predicted aspects for one sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub aspects: Vec<AspectAnnotation>,
}

/// For JMASA and MATE, micro precision/recall/F1 with `gold`, `predicted`
/// and `matched` tuple counts. For MASC, `gold` counts gold spans,
/// `predicted` the gold spans that received a prediction, `matched` the
/// correctly classified ones; `accuracy` is matched/gold and
/// precision/recall/F1 are macro averages over the polarity classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub task: Task,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    pub gold: usize,
    pub predicted: usize,
    pub matched: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Multiset intersection size.
fn matches<K: Eq + Hash>(gold: impl Iterator<Item = K>, pred: impl Iterator<Item = K>) -> usize {
    let mut counts: HashMap<K, usize> = HashMap::new();
    for k in gold {
        *counts.entry(k).or_default() += 1;
    }
    let mut hit = 0;
    for k in pred {
        if let Some(c) = counts.get_mut(&k).filter(|c| **c > 0) {
            *c -= 1;
            hit += 1;
        }
    }
    hit
}

pub fn evaluate(gold: &Dataset, predicted: &[Prediction], task: Task) -> Result<MetricsReport, SeqError> {
    if gold.len() != predicted.len() {
        return Err(SeqError::Contract(format!(
            "{} predictions for {} gold samples",
            predicted.len(),
            gold.len()
        )));
    }
    if let Some((s, p)) = gold.iter().zip(predicted).find(|(s, p)| s.id != p.id) {
        return Err(SeqError::Contract(format!("prediction {:?} aligned with gold sample {:?}", p.id, s.id)));
    }
    let pairs = gold.iter().zip(predicted).map(|(s, p)| (&s.aspects, &p.aspects));
    match task {
        Task::Jmasa | Task::Mate => {
            let key = |a: &AspectAnnotation| (a.begin, a.end, if task == Task::Jmasa { Some(a.polarity) } else { None });
            let (mut g, mut pr, mut hit) = (0, 0, 0);
            for (gs, ps) in pairs {
                g += gs.len();
                pr += ps.len();
                hit += matches(gs.iter().map(key), ps.iter().map(key));
            }
            let (p, r) = (ratio(hit, pr), ratio(hit, g));
            Ok(MetricsReport {
                task,
                precision: p,
                recall: r,
                f1: harmonic(p, r),
                accuracy: None,
                gold: g,
                predicted: pr,
                matched: hit,
            })
        }
        Task::Masc => {
            // Confusion over gold spans; a span without a prediction is wrong
            // for its gold class and counts against no other class.
            let mut tp = [0usize; 3];
            let mut fp = [0usize; 3];
            let mut fn_ = [0usize; 3];
            let (mut g, mut covered) = (0, 0);
            for (gs, ps) in pairs {
                for a in gs {
                    g += 1;
                    let truth = a.polarity.code() as usize;
                    match ps.iter().find(|p| p.span() == a.span()) {
                        Some(p) => {
                            covered += 1;
                            let guess = p.polarity.code() as usize;
                            if guess == truth {
                                tp[truth] += 1;
                            } else {
                                fp[guess] += 1;
                                fn_[truth] += 1;
                            }
                        }
                        None => fn_[truth] += 1,
                    }
                }
            }
            let active: Vec<usize> = Polarity::ALL
                .iter()
                .map(|p| p.code() as usize)
                .filter(|&c| tp[c] + fp[c] + fn_[c] > 0)
                .collect();
            let (mut p_sum, mut r_sum, mut f_sum) = (0.0, 0.0, 0.0);
            for &c in &active {
                let p = ratio(tp[c], tp[c] + fp[c]);
                let r = ratio(tp[c], tp[c] + fn_[c]);
                p_sum += p;
                r_sum += r;
                f_sum += harmonic(p, r);
            }
            let k = active.len().max(1) as f64;
            let correct: usize = tp.iter().sum();
            Ok(MetricsReport {
                task,
                precision: p_sum / k,
                recall: r_sum / k,
                f1: f_sum / k,
                accuracy: Some(ratio(correct, g)),
                gold: g,
                predicted: covered,
                matched: correct,
            })
        }
    }
}
