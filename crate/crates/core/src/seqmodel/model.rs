use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::params::{AttentionParams, FeedForwardParams, ModelParams, ParamGroup, Shape, Vocab};
use super::{ModelConfig, SeqError};
use crate::aed::{a3m_graph, association_graph, association_mask, gcn_graph, sentic_graph};
use crate::datamodel::{decode_target, AspectAnnotation, MultimodalSample, OutputSymbol, OutputVocab, TargetSequence};
use crate::numerics::{finite_diff_check, Graph, Matrix, NodeId, NumericsError};

const MASKED: f64 = -1e30;

/// Which text tokens count as aspects when building the association matrix.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AspectSource {
    /// Every token inside a gold span.
    #[default]
    Gold,
    /// Noun-flagged tokens.
    Candidates,
}

/// `pe[pos][2i] = sin(pos / 10000^(2i/h))`, `pe[pos][2i+1] = cos(…)`.
pub fn sinusoid(len: usize, h: usize) -> Matrix {
    let mut out = Matrix::zeros(len, h);
    for pos in 0..len {
        for j in 0..h {
            let rate = 10000f64.powf((j - j % 2) as f64 / h as f64);
            let angle = pos as f64 / rate;
            out[(pos, j)] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    out
}

/// `alpha_1·hat + alpha_2·refined`.
pub fn fuse(hat: &Matrix, refined: &Matrix, alpha_1: f64, alpha_2: f64) -> Result<Matrix, SeqError> {
    if hat.shape() != refined.shape() {
        return Err(SeqError::Contract(format!(
            "fusion inputs differ in shape: {:?} vs {:?}",
            hat.shape(),
            refined.shape()
        )));
    }
    Ok(hat.zip_map(refined, |a, b| alpha_1 * a + alpha_2 * b))
}

/// Tape handles for one encoded sample.
struct Encoded {
    states: NodeId,
    fused: NodeId,
    /// Normalized fused states read by the decoder.
    memory: NodeId,
    /// (n+4)×h pointer candidates: averaged text rows, classes, terminator.
    cand: NodeId,
}

/// Configuration, vocabulary and parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub params: ModelParams,
}

impl Model {
    /// Fresh parameters from `config.seed`. `d_img` must agree with the
    /// config when the config names one.
    pub fn new(mut config: ModelConfig, vocab: Vocab, d_img: usize) -> Result<Self, SeqError> {
        if config.d_img.is_some_and(|d| d != d_img) {
            return Err(SeqError::Contract(format!(
                "configured d_img {} but the data has {d_img}",
                config.d_img.unwrap_or_default()
            )));
        }
        config.d_img = Some(d_img);
        config.validate()?;
        let shape = Shape {
            vocab: vocab.len(),
            hidden: config.hidden,
            d_img,
            encoder_layers: config.encoder_layers,
            decoder_layers: config.decoder_layers,
            gcn_layers: config.gcn_layers,
        };
        let params = ModelParams::init(shape, config.seed);
        Ok(Self { config, vocab, params })
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    fn check_sample(&self, s: &MultimodalSample) -> Result<(), SeqError> {
        if s.n() == 0 || s.m() == 0 {
            return Err(SeqError::Contract(format!("sample {} needs tokens and image blocks", s.id)));
        }
        if Some(s.d_img()) != self.config.d_img {
            return Err(SeqError::Contract(format!(
                "sample {} has image dimension {}, model expects {:?}",
                s.id,
                s.d_img(),
                self.config.d_img
            )));
        }
        Ok(())
    }

    fn encode_graph(
        &self,
        g: &mut Graph,
        p: &ModelParams<NodeId>,
        s: &MultimodalSample,
        source: AspectSource,
    ) -> Result<Encoded, SeqError> {
        self.check_sample(s)?;
        let cfg = &self.config;
        let (m, n, h) = (s.m(), s.n(), cfg.hidden);

        let blocks = Matrix::from_rows(&s.image_blocks)?;
        let blocks = g.constant(blocks);
        let img = g.matmul(blocks, p.img_w)?;
        let img = g.add_row(img, p.img_b)?;
        let ids = self.vocab.ids(&s.tokens);
        let tok = g.gather_rows(p.embed, &ids)?;
        let x = g.concat_rows(&[img, tok])?;
        let pe = g.constant(sinusoid(m + n, h));
        let mut x = g.add(x, pe)?;
        for layer in &p.encoder {
            x = attention(g, x, x, &layer.attn, h, false)?;
            x = feed_forward(g, x, &layer.ffn, h)?;
        }
        let states = x;

        let (hat, enhanced) = if cfg.bypass_aesa {
            (states, states)
        } else {
            let mut cands: Vec<usize> = s.noun_indices().into_iter().map(|i| i + m).collect();
            if cands.is_empty() {
                cands = (m..m + n).collect();
            }
            let hat = a3m_graph(g, states, &cands, &p.a3m)?.hat;
            let enhanced = sentic_graph(g, hat, &s.sentic, m, &p.sentic)?;
            (hat, enhanced)
        };

        let fused = if cfg.alpha_2 == 0.0 {
            g.scale(hat, cfg.alpha_1)
        } else {
            let aspects = match source {
                AspectSource::Gold => s.gold_aspect_tokens(),
                AspectSource::Candidates => s.noun_indices(),
            };
            let mask = association_mask(&s.dep_dist, &aspects, m, n, cfg.threshold)?;
            let a = association_graph(g, hat, &mask)?;
            let refined = gcn_graph(g, a, enhanced, &p.gcn)?;
            let left = g.scale(hat, cfg.alpha_1);
            let right = g.scale(refined, cfg.alpha_2);
            g.add(left, right)?
        };

        let memory = rms_norm(g, fused, h);
        let text = g.slice_rows(memory, m, m + n)?;
        let bar = g.add(tok, text)?;
        let bar = g.scale(bar, 0.5);
        let cand = g.concat_rows(&[bar, p.classes, p.eos])?;
        Ok(Encoded { states, fused, memory, cand })
    }

    /// Logits over the n+4 outputs for every step after `prefix`
    /// ((|prefix|+1)×(n+4)).
    fn decoder_graph(&self, g: &mut Graph, p: &ModelParams<NodeId>, enc: &Encoded, prefix: &[usize]) -> Result<NodeId, SeqError> {
        let h = self.config.hidden;
        let inputs = if prefix.is_empty() {
            p.bos
        } else {
            let emitted = g.gather_rows(enc.cand, prefix)?;
            g.concat_rows(&[p.bos, emitted])?
        };
        let pe = g.constant(sinusoid(prefix.len() + 1, h));
        let x = g.add(inputs, pe)?;
        let slot_ids: Vec<usize> = (0..=prefix.len()).map(|t| t % 3).collect();
        let slots = g.gather_rows(p.slots, &slot_ids)?;
        let mut x = g.add(x, slots)?;
        for layer in &p.decoder {
            x = attention(g, x, x, &layer.self_attn, h, true)?;
            x = attention(g, x, enc.memory, &layer.cross_attn, h, false)?;
            x = feed_forward(g, x, &layer.ffn, h)?;
        }
        let out = g.matmul(x, p.out_w)?;
        let out = g.add_row(out, p.out_b)?;
        let cand_t = g.transpose(enc.cand);
        let logits = g.matmul(out, cand_t)?;
        Ok(g.scale(logits, 1.0 / (h as f64).sqrt()))
    }

    fn loss_graph(&self, g: &mut Graph, p: &ModelParams<NodeId>, s: &MultimodalSample) -> Result<NodeId, SeqError> {
        let target = s.target()?;
        let y = target.indices();
        let enc = self.encode_graph(g, p, s, self.config.loss_aspects)?;
        let logits = self.decoder_graph(g, p, &enc, &y[..y.len() - 1])?;
        let logp = g.log_softmax_rows(logits);
        let entries: Vec<(usize, usize)> = y.iter().copied().enumerate().collect();
        let picked = g.pick(logp, &entries)?;
        let total = g.sum_all(picked);
        Ok(g.scale(total, -1.0))
    }

    fn constants(&self, g: &mut Graph) -> ModelParams<NodeId> {
        self.params.map(|m| g.constant(m.clone()))
    }

    /// Encoder states H, (m+n)×h, images first.
    pub fn encode(&self, s: &MultimodalSample) -> Result<Matrix, SeqError> {
        let mut g = Graph::new();
        let p = self.constants(&mut g);
        let enc = self.encode_graph(&mut g, &p, s, AspectSource::Candidates)?;
        Ok(g.value(enc.states).clone())
    }

    /// Fused states H̃ for the given association aspect source.
    pub fn fused_states(&self, s: &MultimodalSample, source: AspectSource) -> Result<Matrix, SeqError> {
        let mut g = Graph::new();
        let p = self.constants(&mut g);
        let enc = self.encode_graph(&mut g, &p, s, source)?;
        Ok(g.value(enc.fused).clone())
    }

    /// Next-symbol distribution after `prefix`, over the n+4 outputs.
    pub fn decoder_distribution(
        &self,
        s: &MultimodalSample,
        prefix: &[usize],
        source: AspectSource,
    ) -> Result<Vec<f64>, SeqError> {
        let vocab = OutputVocab::new(s.n());
        if let Some(&bad) = prefix.iter().find(|&&i| i >= vocab.size()) {
            return Err(SeqError::Contract(format!("prefix index {bad} outside {} outputs", vocab.size())));
        }
        if prefix.contains(&vocab.eos()) {
            return Err(SeqError::Contract("prefix contains the terminator".into()));
        }
        let mut g = Graph::new();
        let p = self.constants(&mut g);
        let enc = self.encode_graph(&mut g, &p, s, source)?;
        let logits = self.decoder_graph(&mut g, &p, &enc, prefix)?;
        let probs = g.softmax_rows(logits);
        Ok(g.value(probs).row(prefix.len()).to_vec())
    }

    /// Teacher-forced `−Σ log P(y_t | y_<t)` over the gold target.
    pub fn sequence_loss(&self, s: &MultimodalSample) -> Result<f64, SeqError> {
        let mut g = Graph::new();
        let p = self.constants(&mut g);
        let root = self.loss_graph(&mut g, &p, s)?;
        Ok(g.value(root).item())
    }

    pub fn loss_and_grad(&self, s: &MultimodalSample) -> Result<(f64, ModelParams), SeqError> {
        let mut g = Graph::new();
        let p = self.params.map(|m| g.param(m.clone()));
        let root = self.loss_graph(&mut g, &p, s)?;
        g.backward(root)?;
        let grads = p.map(|&id| g.grad_or_zeros(id));
        Ok((g.value(root).item(), grads))
    }

    /// Mean loss and mean gradient over `batch`. Per-sample work runs in
    /// parallel; the reduction is sequential in batch order.
    pub fn batch_loss_and_grad(&self, batch: &[&MultimodalSample]) -> Result<(f64, ModelParams), SeqError> {
        if batch.is_empty() {
            return Err(SeqError::Contract("empty batch".into()));
        }
        let parts: Vec<(f64, ModelParams)> = batch
            .par_iter()
            .map(|s| self.loss_and_grad(s))
            .collect::<Result<_, _>>()?;
        let scale = 1.0 / batch.len() as f64;
        let mut iter = parts.into_iter();
        let (mut loss, mut grad) = iter.next().expect("nonempty");
        for (l, gr) in iter {
            loss += l;
            let summed: Vec<Matrix> = grad
                .tensors()
                .iter()
                .zip(gr.tensors())
                .map(|(a, b)| a.value.zip_map(b.value, |x, y| x + y))
                .collect();
            grad = grad.with_values(summed);
        }
        Ok((loss * scale, grad.map(|m| m.map(|v| v * scale))))
    }

    /// One plain gradient step, after optional global-norm clipping.
    pub fn sgd_step(&mut self, grad: &ModelParams) {
        let mut lr = self.config.learning_rate;
        if let Some(clip) = self.config.grad_clip {
            let norm = grad.squared_norm().sqrt();
            if norm > clip {
                lr *= clip / norm;
            }
        }
        let updated: Vec<Matrix> = self
            .params
            .tensors()
            .iter()
            .zip(grad.tensors())
            .map(|(p, d)| p.value.zip_map(d.value, |w, dw| w - lr * dw))
            .collect();
        self.params = self.params.with_values(updated);
    }

    /// Greedy decoding with validity masks: a triple starts with a position
    /// after the previous span or the terminator, its end is not before its
    /// begin, and its third symbol is a polarity.
    pub fn predict(&self, s: &MultimodalSample) -> Result<Vec<AspectAnnotation>, SeqError> {
        let n = s.n();
        let vocab = OutputVocab::new(n);
        let mut g = Graph::new();
        let p = self.constants(&mut g);
        let enc = self.encode_graph(&mut g, &p, s, AspectSource::Candidates)?;
        let mut seq: Vec<usize> = Vec::new();
        let mut first_free = 0;
        loop {
            let allowed: Vec<usize> = match seq.len() % 3 {
                0 if seq.len() / 3 >= self.config.max_aspects || first_free >= n => vec![vocab.eos()],
                0 => (first_free..n).chain([vocab.eos()]).collect(),
                1 => (seq[seq.len() - 1]..n).collect(),
                _ => (n..n + 3).collect(),
            };
            let next = if allowed.len() == 1 {
                allowed[0]
            } else {
                let logits = self.decoder_graph(&mut g, &p, &enc, &seq)?;
                let row = g.value(logits).row(seq.len());
                let mut best = allowed[0];
                for &i in &allowed[1..] {
                    if row[i] > row[best] {
                        best = i;
                    }
                }
                best
            };
            seq.push(next);
            match vocab.symbol(next) {
                Some(OutputSymbol::Eos) => break,
                Some(OutputSymbol::Position(e)) if seq.len() % 3 == 2 => first_free = e + 1,
                _ => {}
            }
        }
        Ok(decode_target(&TargetSequence::from_indices(seq), n)?)
    }
}

fn attention(
    g: &mut Graph,
    x: NodeId,
    ctx: NodeId,
    p: &AttentionParams<NodeId>,
    h: usize,
    causal: bool,
) -> Result<NodeId, SeqError> {
    let q = g.matmul(x, p.w_q)?;
    let k = g.matmul(ctx, p.w_k)?;
    let v = g.matmul(ctx, p.w_v)?;
    let kt = g.transpose(k);
    let scores = g.matmul(q, kt)?;
    let mut scores = g.scale(scores, 1.0 / (h as f64).sqrt());
    if causal {
        let (r, c) = g.value(scores).shape();
        let mut mask = Matrix::zeros(r, c);
        for i in 0..r {
            for j in i + 1..c {
                mask[(i, j)] = MASKED;
            }
        }
        let mask = g.constant(mask);
        scores = g.add(scores, mask)?;
    }
    let weights = g.softmax_rows(scores);
    let mixed = g.matmul(weights, v)?;
    let out = g.matmul(mixed, p.w_o)?;
    let sum = g.add(x, out)?;
    Ok(rms_norm(g, sum, h))
}

/// Rows rescaled to norm √h.
fn rms_norm(g: &mut Graph, x: NodeId, h: usize) -> NodeId {
    let unit = g.row_normalize(x);
    g.scale(unit, (h as f64).sqrt())
}

fn feed_forward(g: &mut Graph, x: NodeId, p: &FeedForwardParams<NodeId>, h: usize) -> Result<NodeId, SeqError> {
    let hidden = g.matmul(x, p.w_1)?;
    let hidden = g.add_row(hidden, p.b_1)?;
    let hidden = g.relu(hidden);
    let out = g.matmul(hidden, p.w_2)?;
    let out = g.add_row(out, p.b_2)?;
    let sum = g.add(x, out)?;
    Ok(rms_norm(g, sum, h))
}

/// Worst finite-difference relative error per parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupCheck {
    pub group: ParamGroup,
    pub max_rel_error: f64,
    /// Tensor holding the worst coordinate.
    pub worst_tensor: String,
    pub analytic: f64,
    pub numeric: f64,
}

impl Model {
    /// Compares the analytic gradient of [`Model::sequence_loss`] against
    /// central differences for every tensor, grouped.
    pub fn gradient_check(&self, s: &MultimodalSample, step: f64) -> Result<Vec<GroupCheck>, SeqError> {
        let values: Vec<Matrix> = self.params.tensors().iter().map(|t| t.value.clone()).collect();
        let report = finite_diff_check(
            |g, ids| {
                let p = self.params.with_values(ids.iter().copied());
                self.loss_graph(g, &p, s).map_err(|e| match e {
                    SeqError::Numerics(n) => n,
                    other => NumericsError::Contract(other.to_string()),
                })
            },
            &values,
            step,
        )?;
        let mut out: Vec<GroupCheck> = Vec::new();
        let tensors = self.params.tensors();
        for ((t, &err), &(analytic, numeric)) in tensors.iter().zip(&report.per_param).zip(&report.per_param_worst) {
            let entry = GroupCheck {
                group: t.group,
                max_rel_error: err,
                worst_tensor: t.name.clone(),
                analytic,
                numeric,
            };
            match out.iter_mut().find(|c| c.group == t.group) {
                Some(c) if err > c.max_rel_error => *c = entry,
                Some(_) => {}
                None => out.push(entry),
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::datamodel::{Dataset, Polarity};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Three tokens, two blocks of dimension 3, two aspects.
    pub(crate) fn tiny_sample() -> MultimodalSample {
        MultimodalSample {
            id: "tiny".into(),
            tokens: vec!["red".into(), "cup".into(), "broke".into()],
            noun_flags: vec![false, true, true],
            image_blocks: vec![vec![0.4, -0.3, 0.9], vec![-0.7, 0.2, 0.1]],
            text_embed: vec![0.3, 0.1],
            image_embed: vec![0.2, 0.4],
            dep_dist: vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]],
            sentic: vec![0.1, 0.6, -0.8],
            aspects: vec![
                AspectAnnotation::new(0, 1, Polarity::Positive),
                AspectAnnotation::new(2, 2, Polarity::Negative),
            ],
            noise_flag: Some(false),
        }
    }

    pub(crate) fn tiny_model(hidden: usize, seed: u64) -> Model {
        let cfg = ModelConfig {
            hidden,
            seed,
            ..ModelConfig::default()
        };
        Model::new(cfg, Vocab::build(&Dataset::new(vec![tiny_sample()])), 3).unwrap()
    }

    fn random_sample(rng: &mut ChaCha8Rng, n: usize, m: usize) -> MultimodalSample {
        let mut s = tiny_sample();
        s.tokens = (0..n).map(|i| ["red", "cup", "broke", "new"][i % 4].to_string()).collect();
        s.noun_flags = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        s.image_blocks = (0..m).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        s.dep_dist = (0..n).map(|i| (0..n).map(|j| i.abs_diff(j) as u32).collect()).collect();
        s.sentic = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        s.aspects = vec![AspectAnnotation::new(0, 0, Polarity::Neutral)];
        s
    }

    #[test]
    fn encode_shape_and_determinism() {
        let model = tiny_model(6, 1);
        let h = model.encode(&tiny_sample()).unwrap();
        assert_eq!(h.shape(), (5, 6));
        assert_eq!(h, tiny_model(6, 1).encode(&tiny_sample()).unwrap());
        let mut unknown = tiny_sample();
        unknown.tokens[1] = "never-seen".into();
        assert!(model.encode(&unknown).is_ok());
    }

    #[test]
    fn encoder_readout_gradient_wrt_embeddings() {
        let model = tiny_model(6, 2);
        let s = tiny_sample();
        let weights = Matrix::from_vec(5, 6, (0..30).map(|k| ((k * 7) % 11) as f64 / 11.0 - 0.5).collect()).unwrap();
        let report = finite_diff_check(
            |g, ids| {
                let mut p = model.params.map(|m| g.constant(m.clone()));
                p.embed = ids[0];
                let enc = model.encode_graph(g, &p, &s, AspectSource::Gold).map_err(|e| NumericsError::Contract(e.to_string()))?;
                let w = g.constant(weights.clone());
                let prod = g.mul(enc.states, w)?;
                Ok(g.sum_all(prod))
            },
            &[model.params.embed.clone()],
            1e-5,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn fuse_cases() {
        let a = Matrix::filled(2, 2, 2.0);
        let b = Matrix::filled(2, 2, 4.0);
        assert_eq!(fuse(&a, &b, 1.0, 0.0).unwrap(), a);
        assert_eq!(fuse(&a, &b, 0.0, 1.0).unwrap(), b);
        assert_eq!(fuse(&a, &b, 0.5, 0.5).unwrap(), Matrix::filled(2, 2, 3.0));
        assert!(fuse(&a, &Matrix::zeros(1, 2), 0.5, 0.5).is_err());
    }

    #[test]
    fn distribution_is_normalised_over_n_plus_four() {
        let model = tiny_model(8, 4);
        let s = tiny_sample();
        let y = s.target().unwrap();
        for t in 0..y.len() {
            let d = model.decoder_distribution(&s, &y.indices()[..t], AspectSource::Candidates).unwrap();
            assert_eq!(d.len(), 7);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&p| p > 0.0 && p < 1.0));
        }
    }

    #[test]
    fn terminator_inside_prefix_is_rejected() {
        let model = tiny_model(4, 0);
        let err = model.decoder_distribution(&tiny_sample(), &[0, 6], AspectSource::Gold);
        assert!(matches!(err, Err(SeqError::Contract(_))));
        assert!(model.decoder_distribution(&tiny_sample(), &[7], AspectSource::Gold).is_err());
    }

    #[test]
    fn zero_output_projection_gives_uniform_distribution() {
        let mut model = tiny_model(8, 5);
        model.params.out_w = Matrix::zeros(8, 8);
        model.params.out_b = Matrix::zeros(1, 8);
        let d = model.decoder_distribution(&tiny_sample(), &[1], AspectSource::Gold).unwrap();
        for p in d {
            assert!((p - 1.0 / 7.0).abs() < 1e-15);
        }
    }

    #[test]
    fn teacher_forced_sum_equals_sequence_loss() {
        let model = tiny_model(8, 6);
        let s = tiny_sample();
        let y = s.target().unwrap();
        let manual: f64 = (0..y.len())
            .map(|t| {
                let d = model.decoder_distribution(&s, &y.indices()[..t], AspectSource::Gold).unwrap();
                -d[y.indices()[t]].ln()
            })
            .sum();
        let loss = model.sequence_loss(&s).unwrap();
        assert!(loss > 0.0);
        assert!((manual - loss).abs() < 1e-12, "{manual} vs {loss}");
    }

    #[test]
    fn batch_loss_is_mean_of_sample_losses() {
        let model = tiny_model(8, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<MultimodalSample> = (0..4).map(|k| random_sample(&mut rng, 3 + k, 2)).collect();
        let refs: Vec<&MultimodalSample> = samples.iter().collect();
        let (batch, grad) = model.batch_loss_and_grad(&refs).unwrap();
        let mean = samples.iter().map(|s| model.sequence_loss(s).unwrap()).sum::<f64>() / 4.0;
        assert!((batch - mean).abs() < 1e-12);
        let (_, g0) = model.loss_and_grad(&samples[0]).unwrap();
        assert_eq!(grad.embed.shape(), g0.embed.shape());
    }

    #[test]
    fn full_gradient_matches_differences_in_every_group() {
        for seed in [0, 1] {
            let checks = tiny_model(8, seed).gradient_check(&tiny_sample(), 1e-4).unwrap();
            assert_eq!(checks.len(), ParamGroup::ALL.len());
            for c in checks {
                assert!(c.max_rel_error < 1e-4, "seed {seed}: {c:?}");
            }
        }
    }

    #[test]
    fn gcn_is_inert_without_its_fusion_weight() {
        let mut model = tiny_model(8, 8);
        model.config.alpha_2 = 0.0;
        let (_, grad) = model.loss_and_grad(&tiny_sample()).unwrap();
        for layer in &grad.gcn {
            assert!(layer.w.data().iter().chain(layer.b.data()).all(|&v| v == 0.0));
        }
        let before = model.sequence_loss(&tiny_sample()).unwrap();
        model.params.gcn[0].w = Matrix::filled(8, 8, 3.0);
        assert_eq!(model.sequence_loss(&tiny_sample()).unwrap(), before);
    }

    #[test]
    fn bypassed_denoising_still_trains() {
        let mut model = tiny_model(8, 9);
        model.config.bypass_aesa = true;
        let (loss, grad) = model.loss_and_grad(&tiny_sample()).unwrap();
        assert!(loss > 0.0 && grad.is_finite());
        assert!(grad.a3m.w_ca.data().iter().all(|&v| v == 0.0));
        model.sgd_step(&grad);
        assert!(model.sequence_loss(&tiny_sample()).unwrap() < loss);
    }

    #[test]
    fn overfits_one_sample_and_recovers_it() {
        let mut model = tiny_model(32, 3);
        model.config.learning_rate = 0.12;
        model.config.grad_clip = Some(2.0);
        let s = tiny_sample();
        let mut losses = Vec::new();
        for _ in 0..50 {
            let (loss, grad) = model.loss_and_grad(&s).unwrap();
            losses.push(loss);
            model.sgd_step(&grad);
        }
        losses.push(model.sequence_loss(&s).unwrap());
        assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
        assert!(losses[50] < 0.1, "{}", losses[50]);
        for _ in 0..500 {
            if model.sequence_loss(&s).unwrap() < 0.01 {
                break;
            }
            let (_, grad) = model.loss_and_grad(&s).unwrap();
            model.sgd_step(&grad);
        }
        assert!(model.sequence_loss(&s).unwrap() < 0.01);
        assert_eq!(model.predict(&s).unwrap(), s.aspects);
    }

    #[test]
    fn predictions_are_always_valid_spans() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..100 {
            let model = tiny_model(8, seed);
            let (n, m) = (rng.gen_range(1..7), rng.gen_range(1..4));
            let s = random_sample(&mut rng, n, m);
            let out = model.predict(&s).unwrap();
            assert!(out.len() <= model.config.max_aspects);
            let mut prev: Option<usize> = None;
            for a in &out {
                assert!(a.begin <= a.end && a.end < s.n());
                assert!(prev.map_or(true, |e| a.begin > e));
                prev = Some(a.end);
            }
        }
    }

    #[test]
    fn terminator_first_gives_no_aspects() {
        let mut model = tiny_model(8, 12);
        model.params.out_w = Matrix::zeros(8, 8);
        model.params.out_b = Matrix::filled(1, 8, 1.0);
        model.params.eos = Matrix::filled(1, 8, 100.0);
        assert!(model.predict(&tiny_sample()).unwrap().is_empty());
    }
}
