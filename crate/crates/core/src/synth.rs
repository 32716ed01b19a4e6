//! Seeded synthetic sentence–image data with a planted polarity signal and
//! controllable sentence-level and block-level image noise.
//!
//! Every aspect head word owns a unit key vector in image-block space. In a
//! clean sample each aspect gets one relevant block equal to `c·key` plus a
//! little noise, with `c` = +2, 0 or −2 for positive, neutral and negative. A
//! noisy sample resamples its blocks and its image embedding independently of
//! the text.

use std::collections::{BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use rand::seq::index::sample as sample_indices;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{save_dataset, AspectAnnotation, Dataset, DatasetError, MultimodalSample, Polarity};

/// Magnitude of the planted component in a relevant block.
const SIGNAL: f64 = 2.0;
/// Standard deviation of the jitter on relevant and background blocks.
const JITTER: f64 = 0.3;
const TWO_TOKEN_ASPECT_RATE: f64 = 0.3;
const DISTRACTOR_RATE: f64 = 0.2;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    /// Image blocks per sample (m).
    pub blocks: usize,
    pub d_img: usize,
    pub d_clip: usize,
    pub vocab_size: usize,
    pub min_aspects: usize,
    pub max_aspects: usize,
    /// Fraction of samples whose image is unrelated to the text.
    pub sentence_noise_rate: f64,
    /// Fraction of blocks in a clean sample that carry pure noise.
    pub aspect_block_noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 200,
            min_tokens: 6,
            max_tokens: 10,
            blocks: 4,
            d_img: 8,
            d_clip: 16,
            vocab_size: 24,
            min_aspects: 1,
            max_aspects: 2,
            sentence_noise_rate: 0.0,
            aspect_block_noise_rate: 0.25,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::Config(msg));
        if self.n_samples == 0 || self.blocks == 0 || self.d_img == 0 {
            return bad("n_samples, blocks and d_img must be at least 1".into());
        }
        if self.d_clip < 2 {
            return bad(format!("d_clip must be at least 2, got {}", self.d_clip));
        }
        if self.vocab_size < 8 {
            return bad(format!("vocab_size must be at least 8, got {}", self.vocab_size));
        }
        if self.min_tokens > self.max_tokens || self.min_aspects > self.max_aspects {
            return bad("token and aspect ranges must be nonempty".into());
        }
        if self.min_aspects == 0 {
            return bad("every sample needs at least one aspect".into());
        }
        if self.min_tokens < 3 * self.max_aspects {
            return bad(format!(
                "min_tokens {} leaves no room for {} separated aspects (need {})",
                self.min_tokens,
                self.max_aspects,
                3 * self.max_aspects
            ));
        }
        if self.max_aspects > self.blocks {
            return bad(format!("max_aspects {} exceeds blocks {}", self.max_aspects, self.blocks));
        }
        for (name, r) in [
            ("sentence_noise_rate", self.sentence_noise_rate),
            ("aspect_block_noise_rate", self.aspect_block_noise_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return bad(format!("{name} must lie in [0, 1], got {r}"));
            }
        }
        Ok(())
    }

    fn noisy_count(&self) -> usize {
        (self.sentence_noise_rate * self.n_samples as f64).round() as usize
    }
}

/// Config echo and split membership, written next to the split files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: SynthConfig,
    pub seed: u64,
    pub noisy_samples: usize,
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub manifest: Manifest,
}

impl SynthDataset {
    /// Writes `train.jsonl`, `dev.jsonl`, `test.jsonl` and `manifest.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        let io_err = |path: &Path, source| SynthError::Io {
            path: path.display().to_string(),
            source,
        };
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        for (name, split) in [("train", &self.train), ("dev", &self.dev), ("test", &self.test)] {
            save_dataset(split, dir.join(format!("{name}.jsonl")))?;
        }
        let path = dir.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }

    pub fn all_samples(&self) -> impl Iterator<Item = &MultimodalSample> {
        self.train.iter().chain(self.dev.iter()).chain(self.test.iter())
    }
}

/// A labelled tree over `n` nodes and its path-length matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyTree {
    pub edges: Vec<(usize, usize)>,
    pub dist: Vec<Vec<u32>>,
}

/// Uniform random labelled tree (Prüfer decoding) with BFS distances.
pub fn build_dependency_tree<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DependencyTree {
    assert!(n >= 1, "a tree needs at least one node");
    let edges = match n {
        1 => Vec::new(),
        2 => vec![(0, 1)],
        _ => {
            let code: Vec<usize> = (0..n - 2).map(|_| rng.gen_range(0..n)).collect();
            prufer_edges(&code, n)
        }
    };
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let dist = (0..n).map(|src| bfs(&adj, src)).collect();
    DependencyTree { edges, dist }
}

fn prufer_edges(code: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &c in code {
        degree[c] += 1;
    }
    let mut leaves: BTreeSet<usize> = (0..n).filter(|&i| degree[i] == 1).collect();
    let mut edges = Vec::with_capacity(n - 1);
    for &c in code {
        let leaf = leaves.pop_first().expect("a Prüfer code always leaves a leaf");
        edges.push((leaf.min(c), leaf.max(c)));
        degree[c] -= 1;
        if degree[c] == 1 {
            leaves.insert(c);
        }
    }
    let a = leaves.pop_first().expect("two leaves remain");
    let b = leaves.pop_first().expect("two leaves remain");
    edges.push((a, b));
    edges
}

fn bfs(adj: &[Vec<usize>], src: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    dist[src] = 0;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Word roles and head-word keys, fixed by the seed.
struct Lexicon {
    heads: Vec<usize>,
    modifiers: Vec<usize>,
    distractors: Vec<usize>,
    fillers: Vec<usize>,
    /// Unit key per head, indexed like `heads`.
    keys: Vec<Vec<f64>>,
}

impl Lexicon {
    fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let v = cfg.vocab_size;
        let mut words: Vec<usize> = (0..v).collect();
        words.shuffle(rng);
        let (n_heads, n_mods, n_dist) = (v / 4, v / 8, v / 8);
        let heads = words[..n_heads].to_vec();
        let modifiers = words[n_heads..n_heads + n_mods].to_vec();
        let distractors = words[n_heads + n_mods..n_heads + n_mods + n_dist].to_vec();
        let fillers = words[n_heads + n_mods + n_dist..].to_vec();
        let keys = heads.iter().map(|_| unit(gaussian(rng, cfg.d_img))).collect();
        Self {
            heads,
            modifiers,
            distractors,
            fillers,
            keys,
        }
    }
}

fn word(id: usize) -> String {
    format!("w{id:03}")
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn generate_dataset(cfg: &SynthConfig) -> Result<SynthDataset, SynthError> {
    cfg.validate()?;
    let n = cfg.n_samples;
    let mut rng = sample_rng(cfg.seed, 0);
    let lexicon = Lexicon::new(cfg, &mut rng);
    let mut noisy = vec![false; n];
    for i in sample_indices(&mut rng, n, cfg.noisy_count()) {
        noisy[i] = true;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let samples: Vec<MultimodalSample> = (0..n)
        .map(|i| generate_sample(cfg, &lexicon, i, noisy[i], &mut sample_rng(cfg.seed, i as u64 + 1)))
        .collect();

    let n_train = (0.7 * n as f64).round() as usize;
    let n_dev = ((0.15 * n as f64).round() as usize).min(n - n_train);
    let mut parts = [
        order[..n_train].to_vec(),
        order[n_train..n_train + n_dev].to_vec(),
        order[n_train + n_dev..].to_vec(),
    ];
    for p in &mut parts {
        p.sort_unstable();
    }
    let split = |idx: &[usize]| Dataset::new(idx.iter().map(|&i| samples[i].clone()).collect());
    let ids = |idx: &[usize]| idx.iter().map(|&i| samples[i].id.clone()).collect();
    Ok(SynthDataset {
        train: split(&parts[0]),
        dev: split(&parts[1]),
        test: split(&parts[2]),
        manifest: Manifest {
            config: cfg.clone(),
            seed: cfg.seed,
            noisy_samples: cfg.noisy_count(),
            train: ids(&parts[0]),
            dev: ids(&parts[1]),
            test: ids(&parts[2]),
        },
    })
}

/// Non-adjacent spans of the given lengths, in order.
fn place_spans<R: Rng + ?Sized>(rng: &mut R, n: usize, lengths: &[usize]) -> Vec<(usize, usize)> {
    // slack tokens distributed over k+1 gaps, inner gaps get one extra
    let k = lengths.len();
    let used: usize = lengths.iter().sum::<usize>() + k.saturating_sub(1);
    let slack = n - used;
    let mut cuts: Vec<usize> = (0..k).map(|_| rng.gen_range(0..=slack)).collect();
    cuts.sort_unstable();
    let mut spans = Vec::with_capacity(k);
    let mut pos = 0;
    let mut prev_cut = 0;
    for (j, (&len, &cut)) in lengths.iter().zip(&cuts).enumerate() {
        pos += cut - prev_cut + usize::from(j > 0);
        prev_cut = cut;
        spans.push((pos, pos + len - 1));
        pos += len;
    }
    spans
}

fn generate_sample(cfg: &SynthConfig, lex: &Lexicon, index: usize, noisy: bool, rng: &mut ChaCha8Rng) -> MultimodalSample {
    let n = rng.gen_range(cfg.min_tokens..=cfg.max_tokens);
    let k = rng.gen_range(cfg.min_aspects..=cfg.max_aspects);
    let lengths: Vec<usize> = (0..k)
        .map(|_| {
            if !lex.modifiers.is_empty() && rng.gen_bool(TWO_TOKEN_ASPECT_RATE) {
                2
            } else {
                1
            }
        })
        .collect();
    let spans = place_spans(rng, n, &lengths);

    let mut tokens = vec![None; n];
    let mut noun_flags = vec![false; n];
    let mut sentic = vec![0.0; n];
    let mut aspects = Vec::with_capacity(k);
    let mut heads = Vec::with_capacity(k);
    for &(b, e) in &spans {
        let polarity = Polarity::ALL[rng.gen_range(0..3)];
        let head = rng.gen_range(0..lex.heads.len());
        tokens[e] = Some(lex.heads[head]);
        if e > b {
            tokens[b] = Some(*lex.modifiers.choose(rng).expect("modifiers exist"));
        }
        for t in b..=e {
            noun_flags[t] = true;
            let centre = match polarity {
                Polarity::Positive => 0.7,
                Polarity::Neutral => 0.0,
                Polarity::Negative => -0.7,
            };
            sentic[t] = centre + rng.gen_range(-0.2..=0.2);
        }
        aspects.push(AspectAnnotation::new(b, e, polarity));
        heads.push(head);
    }
    let tokens: Vec<String> = tokens
        .into_iter()
        .enumerate()
        .map(|(t, w)| match w {
            Some(w) => word(w),
            None => {
                sentic[t] = rng.gen_range(-0.2..=0.2);
                if rng.gen_bool(DISTRACTOR_RATE) {
                    noun_flags[t] = true;
                    word(*lex.distractors.choose(rng).expect("distractors exist"))
                } else {
                    word(*lex.fillers.choose(rng).expect("fillers exist"))
                }
            }
        })
        .collect();

    let tree = build_dependency_tree(n, rng);
    let text_embed = gaussian(rng, cfg.d_clip);
    let (image_blocks, image_embed) = if noisy {
        let blocks = (0..cfg.blocks).map(|_| gaussian(rng, cfg.d_img)).collect();
        (blocks, gaussian(rng, cfg.d_clip))
    } else {
        (clean_blocks(cfg, lex, &aspects, &heads, rng), correlated(rng, &text_embed))
    };

    MultimodalSample {
        id: format!("s{index:05}"),
        tokens,
        noun_flags,
        image_blocks,
        text_embed,
        image_embed,
        dep_dist: tree.dist,
        sentic,
        aspects,
        noise_flag: Some(noisy),
    }
}

fn clean_blocks(
    cfg: &SynthConfig,
    lex: &Lexicon,
    aspects: &[AspectAnnotation],
    heads: &[usize],
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let m = cfg.blocks;
    let mut layout: Vec<usize> = (0..m).collect();
    layout.shuffle(rng);
    let (relevant, rest) = layout.split_at(aspects.len());
    let n_noise = ((cfg.aspect_block_noise_rate * m as f64).round() as usize).min(rest.len());
    let mut blocks = vec![Vec::new(); m];
    for ((&slot, a), &head) in relevant.iter().zip(aspects).zip(heads) {
        let c = match a.polarity {
            Polarity::Positive => SIGNAL,
            Polarity::Neutral => 0.0,
            Polarity::Negative => -SIGNAL,
        };
        blocks[slot] = lex.keys[head]
            .iter()
            .map(|&kv| {
                let z: f64 = StandardNormal.sample(rng);
                c * kv + JITTER * z
            })
            .collect();
    }
    for (j, &slot) in rest.iter().enumerate() {
        let scale = if j < n_noise { 1.0 } else { JITTER };
        blocks[slot] = gaussian(rng, cfg.d_img).into_iter().map(|x| scale * x).collect();
    }
    blocks
}

/// A unit vector at a cosine drawn from [0.6, 0.95] to `text`.
fn correlated<R: Rng + ?Sized>(rng: &mut R, text: &[f64]) -> Vec<f64> {
    let t = unit(text.to_vec());
    let c: f64 = rng.gen_range(0.6..=0.95);
    loop {
        let u = gaussian(rng, text.len());
        let along: f64 = u.iter().zip(&t).map(|(a, b)| a * b).sum();
        let perp: Vec<f64> = u.iter().zip(&t).map(|(a, b)| a - along * b).collect();
        let norm = perp.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            let s = (1.0 - c * c).sqrt();
            return t.iter().zip(&perp).map(|(a, p)| c * a + s * p / norm).collect();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::validate_sample;
    use rand::Rng;
    use crate::numerics::cosine;
    use proptest::prelude::*;

    fn small(n: usize, rho_s: f64, seed: u64) -> SynthConfig {
        SynthConfig {
            n_samples: n,
            sentence_noise_rate: rho_s,
            seed,
            ..SynthConfig::default()
        }
    }

    fn path(edges: &[(usize, usize)], n: usize, from: usize, to: usize) -> Vec<usize> {
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut parent = vec![usize::MAX; n];
        parent[from] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if parent[v] == usize::MAX {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        let mut out = vec![to];
        let mut cur = to;
        while cur != from {
            cur = parent[cur];
            out.push(cur);
        }
        out
    }

    #[test]
    fn trivial_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = build_dependency_tree(1, &mut rng);
        assert!(one.edges.is_empty());
        assert_eq!(one.dist, vec![vec![0]]);
        let two = build_dependency_tree(2, &mut rng);
        assert_eq!(two.dist, vec![vec![0, 1], vec![1, 0]]);
    }

    #[test]
    fn six_node_distances_follow_tree_paths() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = build_dependency_tree(6, &mut rng);
            for i in 0..6 {
                for k in 0..6 {
                    let on_path = path(&t.edges, 6, i, k);
                    assert_eq!(t.dist[i][k] as usize, on_path.len() - 1);
                    for j in 0..6 {
                        let via = t.dist[i][j] + t.dist[j][k];
                        assert!(t.dist[i][k] <= via);
                        assert_eq!(t.dist[i][k] == via, on_path.contains(&j), "{i} {j} {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn every_three_node_tree_is_reachable() {
        let mut seen = BTreeSet::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut e = build_dependency_tree(3, &mut rng).edges;
            e.sort_unstable();
            seen.insert(e);
        }
        assert_eq!(seen.len(), 3);
    }

    proptest! {
        #[test]
        fn trees_are_spanning_and_metric(n in 1usize..20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = build_dependency_tree(n, &mut rng);
            prop_assert_eq!(t.edges.len(), n - 1);
            for i in 0..n {
                prop_assert_eq!(t.dist[i][i], 0);
                for j in 0..n {
                    prop_assert_eq!(t.dist[i][j], t.dist[j][i]);
                    prop_assert!(t.dist[i][j] as usize <= n - 1);
                    prop_assert!(i == j || t.dist[i][j] >= 1);
                }
            }
            for &(a, b) in &t.edges {
                prop_assert_eq!(t.dist[a][b], 1);
            }
        }

        #[test]
        fn spans_are_separated_and_in_range(n in 6usize..20, k in 1usize..3, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lengths: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=2)).collect();
            let spans = place_spans(&mut rng, n, &lengths);
            for (s, &len) in spans.iter().zip(&lengths) {
                prop_assert_eq!(s.1 + 1 - s.0, len);
                prop_assert!(s.1 < n);
            }
            for w in spans.windows(2) {
                prop_assert!(w[1].0 >= w[0].1 + 2);
            }
        }
    }

    #[test]
    fn same_seed_writes_identical_files() {
        let cfg = small(60, 0.3, 5);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_dataset(&cfg).unwrap().write(a.path()).unwrap();
        generate_dataset(&cfg).unwrap().write(b.path()).unwrap();
        for f in ["train.jsonl", "dev.jsonl", "test.jsonl", "manifest.json"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
        let other = generate_dataset(&small(60, 0.3, 6)).unwrap();
        assert_ne!(other, generate_dataset(&cfg).unwrap());
    }

    #[test]
    fn noisy_count_is_exact() {
        let d = generate_dataset(&small(100, 0.4, 1)).unwrap();
        let noisy = d.all_samples().filter(|s| s.noise_flag == Some(true)).count();
        assert_eq!(noisy, 40);
        assert_eq!(d.manifest.noisy_samples, 40);
        assert!(d.all_samples().all(|s| s.noise_flag.is_some()));
    }

    #[test]
    fn clean_pairs_agree_and_noisy_pairs_do_not() {
        let clean = generate_dataset(&small(100, 0.0, 2)).unwrap();
        let cos: Vec<f64> = clean.all_samples().map(|s| cosine(&s.text_embed, &s.image_embed).unwrap()).collect();
        assert!(cos.iter().all(|&c| (0.6 - 1e-9..=0.95 + 1e-9).contains(&c)));
        assert!(cos.iter().sum::<f64>() / cos.len() as f64 >= 0.6);

        let mixed = generate_dataset(&small(100, 0.5, 2)).unwrap();
        let mean = |flag: bool| {
            let v: Vec<f64> = mixed
                .all_samples()
                .filter(|s| s.noise_flag == Some(flag))
                .map(|s| cosine(&s.text_embed, &s.image_embed).unwrap())
                .collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(false) - mean(true) >= 0.3, "{} {}", mean(false), mean(true));
    }

    #[test]
    fn splits_partition_the_samples() {
        let d = generate_dataset(&small(200, 0.2, 3)).unwrap();
        assert_eq!((d.train.len(), d.dev.len(), d.test.len()), (140, 30, 30));
        let mut ids: Vec<&String> = d.manifest.train.iter().chain(&d.manifest.dev).chain(&d.manifest.test).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 200);
        let all = Dataset::new(d.all_samples().cloned().collect());
        all.check_consistency().unwrap();
    }

    #[test]
    fn samples_are_valid_and_aspects_are_flagged() {
        let cfg = SynthConfig {
            max_aspects: 3,
            min_tokens: 9,
            max_tokens: 14,
            ..small(150, 0.3, 4)
        };
        let d = generate_dataset(&cfg).unwrap();
        for s in d.all_samples() {
            validate_sample(&s).unwrap_or_else(|v| panic!("{}: {v:?}", s.id));
            assert!(s.gold_aspect_tokens().iter().all(|&t| s.noun_flags[t]));
            assert!((1..=3).contains(&s.aspects.len()));
            assert_eq!(s.m(), cfg.blocks);
            assert_eq!(s.d_img(), cfg.d_img);
        }
    }

    #[test]
    fn relevant_blocks_carry_the_polarity() {
        let cfg = SynthConfig {
            aspect_block_noise_rate: 0.0,
            ..small(80, 0.0, 9)
        };
        let d = generate_dataset(&cfg).unwrap();
        let lex = Lexicon::new(&cfg, &mut sample_rng(cfg.seed, 0));
        for s in d.all_samples() {
            for a in &s.aspects {
                let head: usize = s.tokens[a.end][1..].parse().unwrap();
                let key = &lex.keys[lex.heads.iter().position(|&h| h == head).unwrap()];
                let scores: Vec<f64> = s.image_blocks.iter().map(|b| crate::numerics::dot(b, key)).collect();
                let max = scores.iter().cloned().fold(f64::MIN, f64::max);
                let min = scores.iter().cloned().fold(f64::MAX, f64::min);
                match a.polarity {
                    Polarity::Positive => assert!(max > 1.0, "{}", s.id),
                    Polarity::Negative => assert!(min < -1.0, "{}", s.id),
                    Polarity::Neutral => {}
                }
            }
        }
    }

    #[test]
    fn sentic_values_follow_polarity() {
        let d = generate_dataset(&small(50, 0.0, 8)).unwrap();
        for s in d.all_samples() {
            let tokens = s.gold_aspect_tokens();
            for a in &s.aspects {
                for t in a.begin..=a.end {
                    let v = s.sentic[t];
                    match a.polarity {
                        Polarity::Positive => assert!((0.5..=0.9).contains(&v)),
                        Polarity::Negative => assert!((-0.9..=-0.5).contains(&v)),
                        Polarity::Neutral => assert!(v.abs() <= 0.2),
                    }
                }
            }
            for t in (0..s.n()).filter(|t| !tokens.contains(t)) {
                assert!(s.sentic[t].abs() <= 0.2);
            }
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        for cfg in [
            SynthConfig { sentence_noise_rate: 1.5, ..SynthConfig::default() },
            SynthConfig { min_tokens: 11, ..SynthConfig::default() },
            SynthConfig { min_tokens: 4, ..SynthConfig::default() },
            SynthConfig { max_aspects: 5, min_tokens: 15, max_tokens: 15, ..SynthConfig::default() },
            SynthConfig { d_clip: 1, ..SynthConfig::default() },
        ] {
            assert!(matches!(generate_dataset(&cfg), Err(SynthError::Config(_))), "{cfg:?}");
        }
    }
}
