//! Output-index codec.
//!
//! For a sentence of n tokens the decoder chooses among n + 4 symbols:
//! `0..n` are token positions, `n..n+3` the polarity classes in code order
//! and `n + 3` terminates the sequence. A sequence is the flattened list of
//! `(begin, end, polarity)` triples followed by the terminator.

use std::fmt;

use super::{AspectAnnotation, Polarity};

/// Index layout of the output vocabulary for one sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutputVocab {
    n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputSymbol {
    Position(usize),
    Polarity(Polarity),
    Eos,
}

impl OutputVocab {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.n + 4
    }

    pub fn eos(&self) -> usize {
        self.n + 3
    }

    pub fn polarity_index(&self, p: Polarity) -> usize {
        self.n + p.code() as usize
    }

    pub fn symbol(&self, index: usize) -> Option<OutputSymbol> {
        if index < self.n {
            Some(OutputSymbol::Position(index))
        } else if index < self.n + 3 {
            Polarity::from_code((index - self.n) as u8).map(OutputSymbol::Polarity)
        } else if index == self.n + 3 {
            Some(OutputSymbol::Eos)
        } else {
            None
        }
    }
}

/// Decoder-side index sequence: 3 indices per aspect plus the terminator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetSequence(Vec<usize>);

impl TargetSequence {
    pub fn from_indices(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("step {step}: {reason}")]
pub struct DecodeError {
    /// Offending position in the index stream (or aspect index when encoding).
    pub step: usize,
    pub reason: String,
}

impl DecodeError {
    fn at(step: usize, reason: impl fmt::Display) -> Self {
        Self {
            step,
            reason: reason.to_string(),
        }
    }
}

/// Flattens aspects into `[b1, e1, p1, …, EOS]`.
pub fn encode_target(aspects: &[AspectAnnotation], n: usize) -> Result<TargetSequence, DecodeError> {
    let vocab = OutputVocab::new(n);
    let mut out = Vec::with_capacity(3 * aspects.len() + 1);
    let mut prev_end: Option<usize> = None;
    for (k, a) in aspects.iter().enumerate() {
        if a.end >= n {
            return Err(DecodeError::at(k, format!("span ({}, {}) outside {n} tokens", a.begin, a.end)));
        }
        if a.end < a.begin {
            return Err(DecodeError::at(k, "end before begin"));
        }
        if prev_end.is_some_and(|e| a.begin <= e) {
            return Err(DecodeError::at(k, "aspects overlap or are not sorted"));
        }
        prev_end = Some(a.end);
        out.extend([a.begin, a.end, vocab.polarity_index(a.polarity)]);
    }
    out.push(vocab.eos());
    Ok(TargetSequence(out))
}

/// Parses triples up to the terminator. Indices after the terminator are ignored.
pub fn decode_target(seq: &TargetSequence, n: usize) -> Result<Vec<AspectAnnotation>, DecodeError> {
    let vocab = OutputVocab::new(n);
    let mut aspects = Vec::new();
    let mut begin = 0;
    let mut end = 0;
    for (step, &index) in seq.indices().iter().enumerate() {
        let symbol = vocab
            .symbol(index)
            .ok_or_else(|| DecodeError::at(step, format!("index {index} outside vocabulary of {}", vocab.size())))?;
        match (step % 3, symbol) {
            (0, OutputSymbol::Eos) => return Ok(aspects),
            (0, OutputSymbol::Position(p)) => begin = p,
            (1, OutputSymbol::Position(p)) => {
                if p < begin {
                    return Err(DecodeError::at(step, "end before begin"));
                }
                end = p;
            }
            (2, OutputSymbol::Polarity(pol)) => aspects.push(AspectAnnotation::new(begin, end, pol)),
            (2, other) => return Err(DecodeError::at(step, format!("expected polarity, found {other:?}"))),
            (_, other) => return Err(DecodeError::at(step, format!("expected position, found {other:?}"))),
        }
    }
    Err(DecodeError::at(seq.len(), "stream ended without EOS"))
}
