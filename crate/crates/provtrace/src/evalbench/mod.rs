//! Retrieval metrics, the experimental grid, and latency benchmarks.
//!
//! Recall@N is the fraction of queries with at least one ground-truth item
//! in the top N; MRR is the mean reciprocal rank of the first relevant item,
//! zero for misses. The grid runs each configured method over clone queries
//! grouped by window size and clone type. Latency benchmarks time warm
//! queries per corpus size and fit T(N) = a * N^b by least squares on the
//! log-log samples.

pub mod synth;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clonegen::CloneQuery;
use crate::hst::{Collection, HstError};
use crate::mossidx::MossConfig;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("rankings ({rankings}) and truths ({truths}) differ in length")]
    LengthMismatch { rankings: usize, truths: usize },
    #[error("recall cutoff must be >= 1")]
    BadCutoff,
    #[error("unknown method: {0} (expected vector-only, winnowing, or hybrid)")]
    UnknownMethod(String),
    #[error("no recall cutoffs given")]
    NoCutoffs,
    #[error("query {query} references unknown doc id {id}")]
    UnknownDocId { query: String, id: String },
    #[error("latency fit needs at least 2 sizes, got {0}")]
    NeedTwoSizes(usize),
    #[error("sizes must be strictly increasing")]
    SizesNotIncreasing,
    #[error("queries_per_size must be >= 1")]
    NoQueries,
    #[error("non-positive latency sample at N={0}")]
    NonPositiveLatency(usize),
    #[error(transparent)]
    Pipeline(#[from] HstError),
}

/// Fraction of queries whose top-N retrieved set intersects the truth set.
pub fn recall_at_n(
    rankings: &[Vec<String>],
    truths: &[HashSet<String>],
    n: usize,
) -> Result<f64, EvalError> {
    if rankings.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            rankings: rankings.len(),
            truths: truths.len(),
        });
    }
    if n < 1 {
        return Err(EvalError::BadCutoff);
    }
    if rankings.is_empty() {
        return Ok(0.0);
    }
    let hits = rankings
        .iter()
        .zip(truths)
        .filter(|(ranking, truth)| ranking.iter().take(n).any(|id| truth.contains(id)))
        .count();
    Ok(hits as f64 / rankings.len() as f64)
}

/// Mean reciprocal rank of the first relevant item; 0 when none is
/// retrieved.
pub fn mrr(rankings: &[Vec<String>], truths: &[HashSet<String>]) -> Result<f64, EvalError> {
    if rankings.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            rankings: rankings.len(),
            truths: truths.len(),
        });
    }
    if rankings.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = rankings
        .iter()
        .zip(truths)
        .map(|(ranking, truth)| {
            ranking
                .iter()
                .position(|id| truth.contains(id))
                .map_or(0.0, |p| 1.0 / (p + 1) as f64)
        })
        .sum();
    Ok(sum / rankings.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    VectorOnly,
    Winnowing,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::VectorOnly, Method::Winnowing, Method::Hybrid];

    pub fn name(&self) -> &'static str {
        match self {
            Method::VectorOnly => "vector-only",
            Method::Winnowing => "winnowing",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "vector-only" => Ok(Method::VectorOnly),
            "winnowing" => Ok(Method::Winnowing),
            "hybrid" => Ok(Method::Hybrid),
            other => Err(EvalError::UnknownMethod(other.to_string())),
        }
    }
}

/// One grid cell: a (window size, clone type, method) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub corpus_size: usize,
    pub window_tokens: usize,
    pub clone_type: u8,
    pub method: Method,
    pub recall_at: BTreeMap<usize, f64>,
    pub mrr: f64,
    pub query_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub cells: Vec<MetricCell>,
}

impl MetricReport {
    /// Aligned-column text rendering.
    pub fn render_table(&self) -> String {
        let cutoffs: Vec<usize> = self
            .cells
            .first()
            .map(|c| c.recall_at.keys().copied().collect())
            .unwrap_or_default();
        let mut header = vec![
            "corpus".to_string(),
            "window".to_string(),
            "type".to_string(),
            "method".to_string(),
            "queries".to_string(),
            "mrr".to_string(),
        ];
        header.extend(cutoffs.iter().map(|n| format!("r@{n}")));
        let mut rows = vec![header];
        for c in &self.cells {
            let mut row = vec![
                c.corpus_size.to_string(),
                c.window_tokens.to_string(),
                c.clone_type.to_string(),
                c.method.to_string(),
                c.query_count.to_string(),
                format!("{:.4}", c.mrr),
            ];
            row.extend(
                cutoffs
                    .iter()
                    .map(|n| format!("{:.4}", c.recall_at.get(n).copied().unwrap_or(0.0))),
            );
            rows.push(row);
        }
        render_columns(&rows)
    }
}

fn render_columns(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; cols];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (i, cell) in row.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{:<width$}", cell, width = widths[i]));
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    /// Stage-1 candidate count for the hybrid method.
    pub candidates: usize,
    /// Budgeted-query settings for the winnowing method.
    pub moss: MossConfig,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            candidates: 100,
            moss: MossConfig::default(),
        }
    }
}

fn rank_one<S: Scalar>(
    c: &Collection<S>,
    method: Method,
    query: &CloneQuery,
    depth: usize,
    opts: &GridOptions,
) -> Result<Vec<String>, EvalError> {
    let fragment = query.fragment_source();
    match method {
        Method::VectorOnly => {
            let emb = c.embed_fragment(&fragment)?;
            if emb.is_zero() {
                return Ok(Vec::new());
            }
            let ef = c.ann().config().ef_search.max(depth);
            let hits = c.ann().search_ef(&emb, depth, ef).map_err(HstError::from)?;
            Ok(hits.into_iter().map(|(id, _)| id).collect())
        }
        Method::Winnowing => {
            let fps = c.fragment_fingerprints(&fragment);
            let cfg = MossConfig {
                top_k: depth,
                ..opts.moss
            };
            let (ranking, _) = c.moss().query_fingerprints(&fps, &cfg).map_err(HstError::from)?;
            Ok(ranking.into_iter().map(|s| s.doc_id).collect())
        }
        Method::Hybrid => {
            let result = c.trace(&fragment, opts.candidates, depth)?;
            Ok(result.entries.into_iter().map(|e| e.doc_id).collect())
        }
    }
}

/// Execute every method over the query set, aggregated per
/// (window size, clone type) cell. Deterministic given the collection and
/// query seeds.
pub fn run_grid<S: Scalar>(
    c: &Collection<S>,
    queries: &[CloneQuery],
    methods: &[Method],
    recall_cutoffs: &[usize],
    opts: &GridOptions,
) -> Result<MetricReport, EvalError> {
    if recall_cutoffs.is_empty() {
        return Err(EvalError::NoCutoffs);
    }
    if recall_cutoffs.iter().any(|&n| n < 1) {
        return Err(EvalError::BadCutoff);
    }
    for q in queries {
        if c.record(&q.source_doc_id).is_none() {
            return Err(EvalError::UnknownDocId {
                query: q.id.clone(),
                id: q.source_doc_id.clone(),
            });
        }
    }
    let depth = *recall_cutoffs.iter().max().expect("non-empty");

    let mut groups: BTreeMap<(usize, u8), Vec<&CloneQuery>> = BTreeMap::new();
    for q in queries {
        groups
            .entry((q.window_tokens, q.clone_type))
            .or_default()
            .push(q);
    }

    let mut cells = Vec::new();
    for ((window_tokens, clone_type), group) in &groups {
        for &method in methods {
            let rankings: Vec<Vec<String>> = group
                .par_iter()
                .map(|q| rank_one(c, method, q, depth, opts))
                .collect::<Result<_, _>>()?;
            let truths: Vec<HashSet<String>> = group
                .iter()
                .map(|q| HashSet::from([q.source_doc_id.clone()]))
                .collect();
            let mut recall_at = BTreeMap::new();
            for &n in recall_cutoffs {
                recall_at.insert(n, recall_at_n(&rankings, &truths, n)?);
            }
            cells.push(MetricCell {
                corpus_size: c.doc_count(),
                window_tokens: *window_tokens,
                clone_type: *clone_type,
                method,
                recall_at,
                mrr: mrr(&rankings, &truths)?,
                query_count: group.len(),
            });
        }
    }
    Ok(MetricReport { cells })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub n: usize,
    pub mean_seconds: f64,
}

/// Power-law fit T(N) = a * N^b of per-size mean latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyFit {
    pub samples: Vec<LatencySample>,
    pub a: f64,
    pub b: f64,
    pub r2: f64,
}

impl LatencyFit {
    /// The (N, T) samples as CSV for external plotting.
    pub fn samples_csv(&self) -> String {
        let mut out = String::from("n,mean_seconds\n");
        for s in &self.samples {
            out.push_str(&format!("{},{:.9e}\n", s.n, s.mean_seconds));
        }
        out
    }
}

/// Least squares on (ln N, ln T): returns (a, b, r2).
pub fn fit_power_law(samples: &[(f64, f64)]) -> Result<(f64, f64, f64), EvalError> {
    if samples.len() < 2 {
        return Err(EvalError::NeedTwoSizes(samples.len()));
    }
    for &(n, t) in samples {
        if t <= 0.0 {
            return Err(EvalError::NonPositiveLatency(n as usize));
        }
    }
    let xs: Vec<f64> = samples.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, t)| t.ln()).collect();
    let m = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / m;
    let mean_y = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x).powi(2)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mean_x) * (y - mean_y))
        .sum();
    let b = sxy / sxx;
    let ln_a = mean_y - b * mean_x;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = ln_a + b * x;
            (y - pred).powi(2)
        })
        .sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((ln_a.exp(), b, r2))
}

/// Measure warm mean per-query latency per corpus size and fit the power
/// law. `prepare(n)` builds the size-n scenario and returns the query
/// runner; a full untimed pass warms caches before the timed pass.
/// Queries run single-threaded to keep timing clean.
pub fn bench_latency<P, R>(
    sizes: &[usize],
    queries_per_size: usize,
    mut prepare: P,
) -> Result<LatencyFit, EvalError>
where
    P: FnMut(usize) -> R,
    R: FnMut(usize),
{
    if sizes.len() < 2 {
        return Err(EvalError::NeedTwoSizes(sizes.len()));
    }
    if !sizes.windows(2).all(|w| w[0] < w[1]) {
        return Err(EvalError::SizesNotIncreasing);
    }
    if queries_per_size == 0 {
        return Err(EvalError::NoQueries);
    }
    let mut samples = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut run = prepare(n);
        for i in 0..queries_per_size {
            run(i);
        }
        let t = Instant::now();
        for i in 0..queries_per_size {
            run(i);
        }
        let mean = t.elapsed().as_secs_f64() / queries_per_size as f64;
        if mean <= 0.0 {
            return Err(EvalError::NonPositiveLatency(n));
        }
        samples.push(LatencySample {
            n,
            mean_seconds: mean,
        });
    }
    let points: Vec<(f64, f64)> = samples
        .iter()
        .map(|s| (s.n as f64, s.mean_seconds))
        .collect();
    let (a, b, r2) = fit_power_law(&points)?;
    Ok(LatencyFit { samples, a, b, r2 })
}
