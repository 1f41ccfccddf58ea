//! Deterministic synthetic corpora for evaluation and benchmarking.
//!
//! Generated snippets imitate the fingerprint statistics of real code: most
//! tokens come from a shared Zipf-distributed vocabulary (keywords, common
//! names), while a handful of per-document identifiers recur a few times and
//! give each document rare, discriminative fingerprints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{splitmix64, Embedding};
use crate::hst::CorpusRecord;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub docs: usize,
    pub seed: u64,
    /// Statements are emitted until a document reaches this many tokens.
    pub target_tokens: usize,
    /// Distinct per-document identifiers.
    pub unique_idents_per_doc: usize,
    /// Total identifier occurrences aimed for per document.
    pub ident_occurrences: usize,
    /// Total vocabulary size (shared head plus pack-local tails).
    pub vocab_size: usize,
    /// Zipf exponent of the vocabulary.
    pub zipf_exponent: f64,
    /// Vocabulary packs. Documents of different packs share only the head
    /// of the vocabulary, the way code from different domains shares
    /// keywords but not library names.
    pub packs: usize,
    /// Vocabulary ranks shared by every pack.
    pub shared_head: usize,
}

impl SynthConfig {
    /// Long snippets (>= 480 tokens) usable with every window size of the
    /// default grid.
    pub fn eval(docs: usize, seed: u64) -> Self {
        Self {
            docs,
            seed,
            target_tokens: 520,
            unique_idents_per_doc: 5,
            ident_occurrences: 20,
            vocab_size: 400,
            zipf_exponent: 1.1,
            packs: 20,
            shared_head: 60,
        }
    }

    /// Short snippets for large-N latency runs.
    pub fn latency(docs: usize, seed: u64) -> Self {
        Self {
            docs,
            seed,
            target_tokens: 80,
            unique_idents_per_doc: 4,
            ident_occurrences: 10,
            vocab_size: 400,
            zipf_exponent: 1.1,
            packs: 20,
            shared_head: 60,
        }
    }
}

const KEYWORDS: [&str; 12] = [
    "let", "if", "else", "while", "for", "return", "break", "const", "struct", "match", "loop",
    "static",
]; // referenced by templates below

const LICENSES: [&str; 4] = ["mit", "apache-2.0", "gpl-3.0", "bsd-3-clause"];

fn mix(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Zipf sampler over ranks 0..n via cumulative weights.
struct Zipf {
    cum: Vec<f64>,
}

impl Zipf {
    fn new(n: usize, exponent: f64) -> Self {
        let mut cum = Vec::with_capacity(n);
        let mut total = 0.0;
        for r in 0..n {
            total += 1.0 / ((r + 1) as f64).powf(exponent);
            cum.push(total);
        }
        Self { cum }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let total = *self.cum.last().expect("non-empty vocabulary");
        let u: f64 = rng.gen::<f64>() * total;
        self.cum.partition_point(|&c| c < u).min(self.cum.len() - 1)
    }
}

fn lowercase_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect()
}

fn identifier(rng: &mut ChaCha8Rng) -> String {
    let mut s = String::with_capacity(9);
    s.push((b'a' + rng.gen_range(0..26)) as char);
    for _ in 0..8 {
        if rng.gen_bool(0.3) {
            s.push((b'0' + rng.gen_range(0..10)) as char);
        } else {
            s.push((b'a' + rng.gen_range(0..26)) as char);
        }
    }
    s
}

struct DocBuilder<'a> {
    rng: ChaCha8Rng,
    vocab: &'a [String],
    zipf: &'a Zipf,
    idents: Vec<String>,
    ident_budget: usize,
    ident_prob: f64,
    tokens: Vec<String>,
}

impl<'a> DocBuilder<'a> {
    fn word(&mut self) -> String {
        if self.ident_budget > 0 && self.rng.gen::<f64>() < self.ident_prob {
            self.ident_budget -= 1;
            let i = self.rng.gen_range(0..self.idents.len());
            return self.idents[i].clone();
        }
        let r = self.zipf.sample(&mut self.rng);
        self.vocab[r].clone()
    }

    fn number(&mut self) -> String {
        self.rng.gen_range(0..100u32).to_string()
    }

    fn push(&mut self, toks: Vec<String>) {
        self.tokens.extend(toks);
        self.tokens.push("\n".to_string());
    }

    fn statement(&mut self) {
        let choice = self.rng.gen_range(0..7u32);
        let (w, n): (Vec<String>, Vec<String>) = (
            (0..5).map(|_| self.word()).collect(),
            (0..2).map(|_| self.number()).collect(),
        );
        let s = |x: &str| x.to_string();
        let toks: Vec<String> = match choice {
            0 => vec![s("let"), w[0].clone(), s("="), w[1].clone(), s("+"), n[0].clone(), s(";")],
            1 => vec![
                s("if"), s("("), w[0].clone(), s("<"), w[1].clone(), s(")"), s("{"),
                w[2].clone(), s("="), w[3].clone(), s("-"), n[0].clone(), s(";"), s("}"),
            ],
            2 => vec![
                w[0].clone(), s("="), w[1].clone(), s("("), w[2].clone(), s(","),
                w[3].clone(), s(")"), s(";"),
            ],
            3 => vec![s("return"), w[0].clone(), s(";")],
            4 => vec![
                s("while"), s("("), w[0].clone(), s("!"), s("="), n[0].clone(), s(")"),
                s("{"), w[1].clone(), s("="), w[1].clone(), s("+"), n[1].clone(), s(";"), s("}"),
            ],
            5 => vec![
                w[0].clone(), s("."), w[1].clone(), s("("), w[2].clone(), s(")"), s(";"),
            ],
            _ => vec![
                s("for"), w[0].clone(), s("in"), n[0].clone(), s("."), s("."), n[1].clone(),
                s("{"), w[1].clone(), s("("), w[2].clone(), s(")"), s(";"), s("}"),
            ],
        };
        self.push(toks);
    }

    fn render(&self) -> (String, usize) {
        let mut out = String::new();
        let mut count = 0usize;
        for t in &self.tokens {
            if t == "\n" {
                out.push('\n');
            } else {
                if !out.is_empty() && !out.ends_with('\n') {
                    out.push(' ');
                }
                out.push_str(t);
                count += 1;
            }
        }
        (out, count)
    }
}

/// Generate a deterministic corpus. Each document draws from its pack's
/// vocabulary view: the shared head plus the pack-local tail.
pub fn generate(cfg: &SynthConfig) -> Vec<CorpusRecord> {
    let mut vocab_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0x56_4F_43));
    let mut vocab: Vec<String> = KEYWORDS.iter().map(|s| s.to_string()).collect();
    while vocab.len() < cfg.vocab_size.max(KEYWORDS.len()) {
        let len = vocab_rng.gen_range(4..=8);
        vocab.push(lowercase_word(&mut vocab_rng, len));
    }
    let packs = cfg.packs.max(1);
    let head = cfg.shared_head.clamp(KEYWORDS.len(), vocab.len());
    let pack_vocabs: Vec<Vec<String>> = (0..packs)
        .map(|p| {
            let mut v: Vec<String> = vocab[..head].to_vec();
            v.extend(
                vocab[head..]
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| i % packs == p)
                    .map(|(_, w)| w.clone()),
            );
            v
        })
        .collect();
    let zipfs: Vec<Zipf> = pack_vocabs
        .iter()
        .map(|v| Zipf::new(v.len(), cfg.zipf_exponent))
        .collect();

    (0..cfg.docs)
        .map(|d| {
            let pack = d % packs;
            let mut rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, d as u64 + 1));
            let idents: Vec<String> = (0..cfg.unique_idents_per_doc.max(1))
                .map(|_| identifier(&mut rng))
                .collect();
            // word slots are roughly half the tokens of a statement
            let ident_prob =
                cfg.ident_occurrences as f64 / (cfg.target_tokens as f64 * 0.45);
            let mut builder = DocBuilder {
                rng,
                vocab: &pack_vocabs[pack],
                zipf: &zipfs[pack],
                idents,
                ident_budget: cfg.ident_occurrences,
                ident_prob,
                tokens: Vec::new(),
            };
            let mut emitted = 0usize;
            while emitted < cfg.target_tokens {
                let before = builder.tokens.len();
                builder.statement();
                emitted += builder
                    .tokens[before..]
                    .iter()
                    .filter(|t| *t != "\n")
                    .count();
            }
            let (content, _count) = builder.render();
            let mut meta_rng = ChaCha8Rng::seed_from_u64(mix(cfg.seed, 0xAE_7A ^ (d as u64)));
            CorpusRecord {
                id: format!("doc-{d:06}"),
                content,
                author: Some(format!("author-{:02}", meta_rng.gen_range(0..40u32))),
                license: Some(LICENSES[meta_rng.gen_range(0..LICENSES.len())].to_string()),
                origin: Some(format!("corpus://pack-{pack:02}/doc-{d:06}.src")),
            }
        })
        .collect()
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let mut raw = Vec::with_capacity(dim);
    while raw.len() < dim {
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        raw.push(r * theta.cos());
        if raw.len() < dim {
            raw.push(r * theta.sin());
        }
    }
    raw
}

/// Seeded random points on the unit sphere (Gaussian components,
/// L2-normalized).
pub fn random_unit_embeddings<S: Scalar>(n: usize, dim: usize, seed: u64) -> Vec<Embedding<S>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, 0xE4_B2_D1));
    (0..n).map(|_| Embedding::from_raw(gaussian_vec(&mut rng, dim))).collect()
}

/// Random unit vectors with cluster structure, the shape embedding
/// workloads actually have. Fully isotropic high-dimensional points defeat
/// any beam-searched proximity graph because all pairwise distances
/// concentrate; snippet embeddings instead live near a low-dimensional
/// manifold, modeled here as seeded Gaussian clusters.
#[derive(Debug, Clone, Copy)]
pub struct ClusteredSpec {
    pub dim: usize,
    pub clusters: usize,
    /// Per-coordinate noise scale relative to the unit-norm center.
    pub noise: f64,
    /// Seed of the shared cluster centers (points and queries drawn against
    /// the same centers must use the same value).
    pub center_seed: u64,
}

pub fn clustered_unit_embeddings<S: Scalar>(
    spec: &ClusteredSpec,
    n: usize,
    point_seed: u64,
) -> Vec<Embedding<S>> {
    let mut center_rng = ChaCha8Rng::seed_from_u64(mix(spec.center_seed, 0xCE_27_E2));
    let centers: Vec<Vec<f64>> = (0..spec.clusters.max(1))
        .map(|_| {
            let raw = gaussian_vec(&mut center_rng, spec.dim);
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            raw.into_iter().map(|v| v / norm).collect()
        })
        .collect();
    let scale = spec.noise / (spec.dim as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(point_seed, 0x90_1A_7E));
    (0..n)
        .map(|_| {
            let center = &centers[rng.gen_range(0..centers.len())];
            let noise = gaussian_vec(&mut rng, spec.dim);
            let raw: Vec<f64> = center
                .iter()
                .zip(&noise)
                .map(|(c, g)| c + scale * g)
                .collect();
            Embedding::from_raw(raw)
        })
        .collect()
}
