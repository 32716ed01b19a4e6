//! Learned tensors, their layout and initialisation, and the token vocabulary.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::aed::{A3mParams, GcnLayerParams, SenticParams};
use crate::datamodel::Dataset;
use crate::numerics::Matrix;

/// Single-head attention projections, all h×h.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams<T = Matrix> {
    pub w_q: T,
    pub w_k: T,
    pub w_v: T,
    pub w_o: T,
}

/// Position-wise relu network with a 2h hidden layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeedForwardParams<T = Matrix> {
    pub w_1: T,
    pub b_1: T,
    pub w_2: T,
    pub b_2: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderLayerParams<T = Matrix> {
    pub attn: AttentionParams<T>,
    pub ffn: FeedForwardParams<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderLayerParams<T = Matrix> {
    pub self_attn: AttentionParams<T>,
    pub cross_attn: AttentionParams<T>,
    pub ffn: FeedForwardParams<T>,
}

impl<T> AttentionParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> AttentionParams<U> {
        AttentionParams {
            w_q: f(&self.w_q),
            w_k: f(&self.w_k),
            w_v: f(&self.w_v),
            w_o: f(&self.w_o),
        }
    }

    fn fields(&self) -> [(&'static str, &T); 4] {
        [("w_q", &self.w_q), ("w_k", &self.w_k), ("w_v", &self.w_v), ("w_o", &self.w_o)]
    }
}

impl<T> FeedForwardParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> FeedForwardParams<U> {
        FeedForwardParams {
            w_1: f(&self.w_1),
            b_1: f(&self.b_1),
            w_2: f(&self.w_2),
            b_2: f(&self.b_2),
        }
    }

    fn fields(&self) -> [(&'static str, &T); 4] {
        [("w_1", &self.w_1), ("b_1", &self.b_1), ("w_2", &self.w_2), ("b_2", &self.b_2)]
    }
}

impl<T> EncoderLayerParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> EncoderLayerParams<U> {
        EncoderLayerParams {
            attn: self.attn.map(&mut f),
            ffn: self.ffn.map(&mut f),
        }
    }
}

impl<T> DecoderLayerParams<T> {
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> DecoderLayerParams<U> {
        DecoderLayerParams {
            self_attn: self.self_attn.map(&mut f),
            cross_attn: self.cross_attn.map(&mut f),
            ffn: self.ffn.map(&mut f),
        }
    }
}

/// Coarse grouping used when reporting gradient checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ParamGroup {
    Embedding,
    Encoder,
    A3m,
    Sentic,
    Gcn,
    Decoder,
    Classes,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 7] = [
        ParamGroup::Embedding,
        ParamGroup::Encoder,
        ParamGroup::A3m,
        ParamGroup::Sentic,
        ParamGroup::Gcn,
        ParamGroup::Decoder,
        ParamGroup::Classes,
    ];
}

/// A named tensor in [`ModelParams::tensors`] order.
#[derive(Debug)]
pub struct TensorRef<'a, T> {
    pub name: String,
    pub group: ParamGroup,
    pub value: &'a T,
}

/// Every learned tensor of the model. `T` is `Matrix` for values and
/// gradients and `NodeId` once bound to a tape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T = Matrix> {
    /// vocab×h token embeddings.
    pub embed: T,
    /// d_img×h image block projection.
    pub img_w: T,
    pub img_b: T,
    pub encoder: Vec<EncoderLayerParams<T>>,
    pub a3m: A3mParams<T>,
    pub sentic: SenticParams<T>,
    pub gcn: Vec<GcnLayerParams<T>>,
    pub decoder: Vec<DecoderLayerParams<T>>,
    /// 1×h start-of-sequence decoder input.
    pub bos: T,
    /// 3×h decoder input offsets for the begin, end and polarity steps.
    pub slots: T,
    /// h×h decoder output projection.
    pub out_w: T,
    pub out_b: T,
    /// 3×h polarity embeddings, rows in polarity code order.
    pub classes: T,
    /// 1×h terminator embedding.
    pub eos: T,
}

impl<T> ModelParams<T> {
    /// Applies `f` to every tensor in [`ModelParams::tensors`] order.
    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> ModelParams<U> {
        ModelParams {
            embed: f(&self.embed),
            img_w: f(&self.img_w),
            img_b: f(&self.img_b),
            encoder: self.encoder.iter().map(|l| l.map(&mut f)).collect(),
            a3m: self.a3m.map(&mut f),
            sentic: self.sentic.map(&mut f),
            gcn: self.gcn.iter().map(|l| l.map(&mut f)).collect(),
            decoder: self.decoder.iter().map(|l| l.map(&mut f)).collect(),
            bos: f(&self.bos),
            slots: f(&self.slots),
            out_w: f(&self.out_w),
            out_b: f(&self.out_b),
            classes: f(&self.classes),
            eos: f(&self.eos),
        }
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = Vec::new();
        let mut push = |name: String, group, value| out.push(TensorRef { name, group, value });
        push("embed".into(), ParamGroup::Embedding, &self.embed);
        push("img_w".into(), ParamGroup::Encoder, &self.img_w);
        push("img_b".into(), ParamGroup::Encoder, &self.img_b);
        for (i, l) in self.encoder.iter().enumerate() {
            for (n, v) in l.attn.fields() {
                push(format!("encoder.{i}.attn.{n}"), ParamGroup::Encoder, v);
            }
            for (n, v) in l.ffn.fields() {
                push(format!("encoder.{i}.ffn.{n}"), ParamGroup::Encoder, v);
            }
        }
        for (n, v) in self.a3m.fields() {
            push(format!("a3m.{n}"), ParamGroup::A3m, v);
        }
        for (n, v) in self.sentic.fields() {
            push(format!("sentic.{n}"), ParamGroup::Sentic, v);
        }
        for (i, l) in self.gcn.iter().enumerate() {
            push(format!("gcn.{i}.w"), ParamGroup::Gcn, &l.w);
            push(format!("gcn.{i}.b"), ParamGroup::Gcn, &l.b);
        }
        for (i, l) in self.decoder.iter().enumerate() {
            for (n, v) in l.self_attn.fields() {
                push(format!("decoder.{i}.self_attn.{n}"), ParamGroup::Decoder, v);
            }
            for (n, v) in l.cross_attn.fields() {
                push(format!("decoder.{i}.cross_attn.{n}"), ParamGroup::Decoder, v);
            }
            for (n, v) in l.ffn.fields() {
                push(format!("decoder.{i}.ffn.{n}"), ParamGroup::Decoder, v);
            }
        }
        push("bos".into(), ParamGroup::Decoder, &self.bos);
        push("slots".into(), ParamGroup::Decoder, &self.slots);
        push("out_w".into(), ParamGroup::Decoder, &self.out_w);
        push("out_b".into(), ParamGroup::Decoder, &self.out_b);
        push("classes".into(), ParamGroup::Classes, &self.classes);
        push("eos".into(), ParamGroup::Classes, &self.eos);
        out
    }

    /// Rebuilds the same layout from values in [`ModelParams::tensors`] order.
    pub fn with_values<U>(&self, values: impl IntoIterator<Item = U>) -> ModelParams<U> {
        let mut it = values.into_iter();
        let out = self.map(|_| it.next().expect("one value per tensor"));
        assert!(it.next().is_none(), "more values than tensors");
        out
    }
}

/// Sizes needed to lay out a fresh parameter set.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Shape {
    pub vocab: usize,
    pub hidden: usize,
    pub d_img: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub gcn_layers: usize,
}

impl ModelParams<Matrix> {
    pub fn zeros(s: Shape) -> Self {
        let h = s.hidden;
        let attn = || AttentionParams {
            w_q: Matrix::zeros(h, h),
            w_k: Matrix::zeros(h, h),
            w_v: Matrix::zeros(h, h),
            w_o: Matrix::zeros(h, h),
        };
        let ffn = || FeedForwardParams {
            w_1: Matrix::zeros(h, 2 * h),
            b_1: Matrix::zeros(1, 2 * h),
            w_2: Matrix::zeros(2 * h, h),
            b_2: Matrix::zeros(1, h),
        };
        ModelParams {
            embed: Matrix::zeros(s.vocab, h),
            img_w: Matrix::zeros(s.d_img, h),
            img_b: Matrix::zeros(1, h),
            encoder: (0..s.encoder_layers)
                .map(|_| EncoderLayerParams { attn: attn(), ffn: ffn() })
                .collect(),
            a3m: A3mParams::zeros(h),
            sentic: SenticParams::zeros(h),
            gcn: (0..s.gcn_layers).map(|_| GcnLayerParams::zeros(h)).collect(),
            decoder: (0..s.decoder_layers)
                .map(|_| DecoderLayerParams {
                    self_attn: attn(),
                    cross_attn: attn(),
                    ffn: ffn(),
                })
                .collect(),
            bos: Matrix::zeros(1, h),
            slots: Matrix::zeros(3, h),
            out_w: Matrix::zeros(h, h),
            out_b: Matrix::zeros(1, h),
            classes: Matrix::zeros(3, h),
            eos: Matrix::zeros(1, h),
        }
    }

    /// Weights uniform in ±1/√fan_in (fan_in = rows for `x·W`, 1 for
    /// lookup tables); biases start at zero.
    pub fn init(s: Shape, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let template = Self::zeros(s);
        let values: Vec<Matrix> = template
            .tensors()
            .iter()
            .map(|t| {
                let (r, c) = t.value.shape();
                if is_bias(&t.name) {
                    return Matrix::zeros(r, c);
                }
                // a lookup reads one row, i.e. a one-hot input
                let fan_in = if is_embedding(&t.name) { 1 } else { r };
                let bound = 1.0 / (fan_in as f64).sqrt();
                let data = (0..r * c).map(|_| rng.gen_range(-bound..=bound)).collect();
                Matrix::from_vec(r, c, data).expect("shape from template")
            })
            .collect();
        template.with_values(values)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.value.is_finite())
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.value.len()).sum()
    }

    /// Sum of squared entries over every tensor.
    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().map(|t| t.value.data().iter().map(|v| v * v).sum::<f64>()).sum()
    }
}

fn is_bias(name: &str) -> bool {
    let last = name.rsplit('.').next().unwrap_or(name);
    last.starts_with("b_") || last == "b" || last.ends_with("_b")
}

fn is_embedding(name: &str) -> bool {
    matches!(name, "embed" | "bos" | "slots" | "classes" | "eos")
}

/// Token strings seen in training; index 0 is the unknown token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    pub const UNK: &'static str = "<unk>";

    /// Sorted distinct tokens of `dataset` after the unknown token.
    pub fn build(dataset: &Dataset) -> Self {
        let mut tokens: Vec<String> = dataset.iter().flat_map(|s| s.tokens.iter().cloned()).collect();
        tokens.sort();
        tokens.dedup();
        tokens.retain(|t| t != Self::UNK);
        tokens.insert(0, Self::UNK.to_string());
        Self::from(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}
