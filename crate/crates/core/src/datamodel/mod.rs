//! Samples, datasets, the output-sequence codec and the JSON-lines file format.

mod codec;
mod io;
mod validate;

pub use codec::{decode_target, encode_target, DecodeError, OutputSymbol, OutputVocab, TargetSequence};
pub use io::{load_dataset, read_jsonl, save_dataset, write_jsonl, DatasetError};
pub use validate::{validate_sample, Violation};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;

/// Aspect sentiment, serialized as 0 (positive), 1 (neutral), 2 (negative).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Polarity {
    Positive,
    Neutral,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Positive, Polarity::Neutral, Polarity::Negative];

    pub fn code(self) -> u8 {
        match self {
            Polarity::Positive => 0,
            Polarity::Neutral => 1,
            Polarity::Negative => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Polarity::Positive),
            1 => Some(Polarity::Neutral),
            2 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

impl TryFrom<u8> for Polarity {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        Polarity::from_code(code).ok_or_else(|| format!("invalid polarity code {code}"))
    }
}

impl From<Polarity> for u8 {
    fn from(p: Polarity) -> u8 {
        p.code()
    }
}

/// An inclusive token span with its sentiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AspectAnnotation {
    pub begin: usize,
    pub end: usize,
    pub polarity: Polarity,
}

impl AspectAnnotation {
    pub fn new(begin: usize, end: usize, polarity: Polarity) -> Self {
        Self { begin, end, polarity }
    }

    pub fn span(&self) -> (usize, usize) {
        (self.begin, self.end)
    }
}

/// One sentence–image pair with precomputed features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultimodalSample {
    pub id: String,
    pub tokens: Vec<String>,
    pub noun_flags: Vec<bool>,
    /// m block feature vectors of dimension d_img.
    pub image_blocks: Vec<Vec<f64>>,
    /// Sentence-level embedding used only for the similarity difficulty.
    pub text_embed: Vec<f64>,
    /// Image-level embedding used only for the similarity difficulty.
    pub image_embed: Vec<f64>,
    /// Pairwise distances in the dependency tree.
    pub dep_dist: Vec<Vec<u32>>,
    /// Per-token affective lexicon values in [-1, 1].
    pub sentic: Vec<f64>,
    pub aspects: Vec<AspectAnnotation>,
    /// Generator ground truth; never read by the model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_flag: Option<bool>,
}

impl MultimodalSample {
    /// Token count n.
    pub fn n(&self) -> usize {
        self.tokens.len()
    }

    /// Image block count m.
    pub fn m(&self) -> usize {
        self.image_blocks.len()
    }

    pub fn d_img(&self) -> usize {
        self.image_blocks.first().map_or(0, Vec::len)
    }

    pub fn d_clip(&self) -> usize {
        self.text_embed.len()
    }

    /// Text positions flagged as candidate aspects.
    pub fn noun_indices(&self) -> Vec<usize> {
        self.noun_flags
            .iter()
            .enumerate()
            .filter_map(|(i, &f)| f.then_some(i))
            .collect()
    }

    /// Every text position covered by a gold aspect span, ascending.
    pub fn gold_aspect_tokens(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.aspects.iter().flat_map(|a| a.begin..=a.end).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn target(&self) -> Result<TargetSequence, DecodeError> {
        encode_target(&self.aspects, self.n())
    }
}

/// An ordered collection of samples sharing feature dimensions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<MultimodalSample>,
}

impl Dataset {
    pub fn new(samples: Vec<MultimodalSample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultimodalSample> {
        self.samples.iter()
    }

    /// (d_img, d_clip) of the first sample.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.d_img(), s.d_clip()))
    }

    /// Checks id uniqueness and uniform feature dimensions.
    pub fn check_consistency(&self) -> Result<(), DatasetError> {
        let mut seen = HashSet::new();
        let dims = self.dims();
        for (i, s) in self.samples.iter().enumerate() {
            if !seen.insert(s.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    line: i + 1,
                    id: s.id.clone(),
                });
            }
            if let Some((d_img, d_clip)) = dims {
                if s.d_img() != d_img {
                    return Err(DatasetError::DimensionMismatch {
                        line: i + 1,
                        field: "image_blocks",
                        expected: d_img,
                        found: s.d_img(),
                    });
                }
                if s.d_clip() != d_clip {
                    return Err(DatasetError::DimensionMismatch {
                        line: i + 1,
                        field: "text_embed",
                        expected: d_clip,
                        found: s.d_clip(),
                    });
                }
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a MultimodalSample;
    type IntoIter = std::slice::Iter<'a, MultimodalSample>;

    fn into_iter(self) -> Self::IntoIter {
        self.samples.iter()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// A small well-formed sample: 4 tokens on the path 0-1-2-3, 2 blocks.
    pub fn sample(id: &str) -> MultimodalSample {
        let dep_dist = (0..4u32)
            .map(|i| (0..4u32).map(|j| i.abs_diff(j)).collect())
            .collect();
        MultimodalSample {
            id: id.to_string(),
            tokens: ["the", "pizza", "was", "great"].map(String::from).to_vec(),
            noun_flags: vec![false, true, false, false],
            image_blocks: vec![vec![0.1, -0.2, 0.3], vec![1.0, 0.5, -0.25]],
            text_embed: vec![0.3, 0.1],
            image_embed: vec![0.25, 0.2],
            dep_dist,
            sentic: vec![0.0, 0.1, 0.0, 0.8],
            aspects: vec![AspectAnnotation::new(1, 1, Polarity::Positive)],
            noise_flag: Some(false),
        }
    }
}
