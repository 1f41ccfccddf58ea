//! Hierarchical Navigable Small World index over unit embeddings.
//!
//! Multi-layer proximity graph searched by beam descent; average query cost
//! is logarithmic in the number of indexed vectors. Construction is
//! sequential and fully deterministic:
//! node levels come from a counter-derived uniform draw, all orderings break
//! ties by node index, so the same items and seed always produce the same
//! graph bytes.
//!
//! Distance is `1 - cosine` on unit vectors; zero-flagged embeddings are
//! rejected at insert. Neighbor lists use diversity-aware selection (see
//! `select_neighbors`), which keeps the graph navigable when distances
//! concentrate.

use std::collections::{BinaryHeap, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio::{self, BinError, Reader};
use crate::embed::{dot_unchecked, Embedding};
use crate::scalar::Scalar;

pub const HNSW_MAGIC: &[u8; 8] = b"HNSWG1\0\0";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HnswConfig {
    /// Max neighbors per node on layers >= 1; layer 0 allows twice as many.
    pub m: usize,
    /// Beam width while building.
    pub ef_construction: usize,
    /// Beam width while searching (raised to `k` when `k` is larger).
    pub ef_search: usize,
    /// Seed for level sampling.
    pub seed: u64,
}

impl Default for HnswConfig {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 128,
            seed: 42,
        }
    }
}

#[derive(Debug, Error)]
pub enum HnswError {
    #[error("duplicate doc id: {0}")]
    DuplicateId(String),
    #[error("dimension mismatch: graph dim {expected}, embedding dim {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("zero-flagged embedding cannot be indexed (doc id: {0})")]
    ZeroEmbedding(String),
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("graph file: {0}")]
    Format(#[from] BinError),
    #[error("graph file corrupt: {0}")]
    Corrupt(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HnswConfig {
    pub fn validate(&self) -> Result<(), HnswError> {
        if self.m < 2 {
            return Err(HnswError::BadConfig(format!("m must be >= 2, got {}", self.m)));
        }
        if self.ef_construction < self.m {
            return Err(HnswError::BadConfig(format!(
                "ef_construction ({}) must be >= m ({})",
                self.ef_construction, self.m
            )));
        }
        if self.ef_search < 1 {
            return Err(HnswError::BadConfig("ef_search must be >= 1".into()));
        }
        Ok(())
    }

    /// Level-scale constant 1/ln(M).
    pub fn ml(&self) -> f64 {
        1.0 / (self.m as f64).ln()
    }

    pub fn max_degree(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.m
        } else {
            self.m
        }
    }
}

/// Node level for the `counter`-th insertion: floor(-ln(U) * mL) with U
/// drawn from a counter-indexed uniform stream, so rebuilding after a reload
/// stays deterministic.
pub(crate) fn level_sample(seed: u64, counter: u64, ml: f64) -> usize {
    let x = crate::embed::splitmix64(seed.wrapping_add(crate::embed::splitmix64(
        counter ^ 0x6A09_E667_F3BC_C909,
    )));
    let u = ((x >> 11) as f64 + 0.5) / 9_007_199_254_740_992.0;
    (-(u.ln()) * ml).floor() as usize
}

/// Heap entry ordered by (distance, node index) for deterministic traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate<S: Scalar> {
    dist: S,
    idx: u32,
}

impl<S: Scalar> Eq for Candidate<S> {}

impl<S: Scalar> Ord for Candidate<S> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dist
            .partial_cmp(&other.dist)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| self.idx.cmp(&other.idx))
    }
}

impl<S: Scalar> PartialOrd for Candidate<S> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Min-by-distance wrapper for the to-visit queue.
struct Near<S: Scalar>(Candidate<S>);

impl<S: Scalar> PartialEq for Near<S> {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl<S: Scalar> Eq for Near<S> {}

impl<S: Scalar> Ord for Near<S> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other.0.cmp(&self.0)
    }
}

impl<S: Scalar> PartialOrd for Near<S> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswGraph<S: Scalar> {
    cfg: HnswConfig,
    dim: usize,
    ids: Vec<String>,
    id_to_idx: HashMap<String, u32>,
    vectors: Vec<S>,
    levels: Vec<u32>,
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    insert_counter: u64,
}

impl<S: Scalar> HnswGraph<S> {
    pub fn new(dim: usize, cfg: HnswConfig) -> Result<Self, HnswError> {
        cfg.validate()?;
        if dim < 1 {
            return Err(HnswError::BadConfig("dim must be >= 1".into()));
        }
        Ok(Self {
            cfg,
            dim,
            ids: Vec::new(),
            id_to_idx: HashMap::new(),
            vectors: Vec::new(),
            levels: Vec::new(),
            links: Vec::new(),
            entry: None,
            insert_counter: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &HnswConfig {
        &self.cfg
    }

    pub fn contains(&self, id: &str) -> bool {
        self.id_to_idx.contains_key(id)
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn entry_point(&self) -> Option<&str> {
        self.entry.map(|e| self.ids[e as usize].as_str())
    }

    pub fn max_level(&self) -> usize {
        self.entry.map_or(0, |e| self.levels[e as usize] as usize)
    }

    pub fn total_edges(&self) -> usize {
        self.links
            .iter()
            .map(|per_node| per_node.iter().map(Vec::len).sum::<usize>())
            .sum()
    }

    fn vector(&self, idx: u32) -> &[S] {
        let i = idx as usize * self.dim;
        &self.vectors[i..i + self.dim]
    }

    /// Stored vector of an indexed doc.
    pub fn node_vector(&self, id: &str) -> Option<&[S]> {
        self.id_to_idx.get(id).map(|&i| self.vector(i))
    }

    fn distance_to(&self, q: &[S], idx: u32) -> S {
        S::one() - dot_unchecked(q, self.vector(idx))
    }

    /// Single-best greedy walk on one layer.
    fn greedy_search(&self, q: &[S], mut current: u32, layer: usize) -> u32 {
        let mut best = self.distance_to(q, current);
        loop {
            let mut improved = false;
            for &nb in &self.links[current as usize][layer] {
                let d = self.distance_to(q, nb);
                if d < best || (d == best && nb < current) {
                    best = d;
                    current = nb;
                    improved = true;
                }
            }
            if !improved {
                return current;
            }
        }
    }

    /// Beam search on one layer; returns up to `ef` nearest candidates
    /// sorted by (distance, node index).
    fn search_layer(&self, q: &[S], entries: &[u32], ef: usize, layer: usize) -> Vec<Candidate<S>> {
        let mut visited: HashSet<u32> = HashSet::new();
        let mut to_visit: BinaryHeap<Near<S>> = BinaryHeap::new();
        let mut found: BinaryHeap<Candidate<S>> = BinaryHeap::new(); // max-heap: worst on top

        for &entry in entries {
            if !visited.insert(entry) {
                continue;
            }
            let d0 = self.distance_to(q, entry);
            to_visit.push(Near(Candidate { dist: d0, idx: entry }));
            found.push(Candidate { dist: d0, idx: entry });
        }
        while found.len() > ef {
            found.pop();
        }

        while let Some(Near(current)) = to_visit.pop() {
            if found.len() >= ef {
                let worst = found.peek().expect("non-empty").dist;
                if current.dist > worst {
                    break;
                }
            }
            for &nb in &self.links[current.idx as usize][layer] {
                if !visited.insert(nb) {
                    continue;
                }
                let d = self.distance_to(q, nb);
                if found.len() < ef || d < found.peek().expect("non-empty").dist {
                    to_visit.push(Near(Candidate { dist: d, idx: nb }));
                    found.push(Candidate { dist: d, idx: nb });
                    if found.len() > ef {
                        found.pop();
                    }
                }
            }
        }
        let mut out = found.into_vec();
        out.sort();
        out
    }

    /// Diversity-aware neighbor selection. Candidates arrive sorted by
    /// distance to the base vector; one is kept only when it is closer to
    /// the base than to every neighbor kept so far, and remaining slots are
    /// filled with the nearest skipped candidates. Plain nearest-only
    /// selection collapses recall on high-dimensional data where all
    /// distances concentrate.
    fn select_neighbors(&self, candidates: &[Candidate<S>], limit: usize) -> Vec<u32> {
        let mut selected: Vec<Candidate<S>> = Vec::with_capacity(limit);
        let mut skipped: Vec<Candidate<S>> = Vec::new();
        for &cand in candidates {
            if selected.len() >= limit {
                break;
            }
            let cv = self.vector(cand.idx);
            let diverse = selected.iter().all(|kept| {
                let between = S::one() - dot_unchecked(cv, self.vector(kept.idx));
                between > cand.dist
            });
            if diverse {
                selected.push(cand);
            } else {
                skipped.push(cand);
            }
        }
        for &cand in &skipped {
            if selected.len() >= limit {
                break;
            }
            selected.push(cand);
        }
        selected.into_iter().map(|c| c.idx).collect()
    }

    /// Re-select the neighbors of an overfull list on `layer`.
    fn prune_neighbors(&mut self, node: u32, layer: usize, limit: usize) {
        let list = &self.links[node as usize][layer];
        if list.len() <= limit {
            return;
        }
        let base = self.vector(node).to_vec();
        let mut scored: Vec<Candidate<S>> = self.links[node as usize][layer]
            .iter()
            .map(|&nb| Candidate {
                dist: S::one() - dot_unchecked(&base, self.vector(nb)),
                idx: nb,
            })
            .collect();
        scored.sort();
        self.links[node as usize][layer] = self.select_neighbors(&scored, limit);
    }

    pub fn insert(&mut self, id: &str, e: &Embedding<S>) -> Result<(), HnswError> {
        if self.id_to_idx.contains_key(id) {
            return Err(HnswError::DuplicateId(id.to_string()));
        }
        if e.dim() != self.dim {
            return Err(HnswError::DimensionMismatch {
                expected: self.dim,
                got: e.dim(),
            });
        }
        if e.is_zero() {
            return Err(HnswError::ZeroEmbedding(id.to_string()));
        }

        let level = level_sample(self.cfg.seed, self.insert_counter, self.cfg.ml());
        self.insert_counter += 1;

        let idx = self.ids.len() as u32;
        self.ids.push(id.to_string());
        self.id_to_idx.insert(id.to_string(), idx);
        self.vectors.extend_from_slice(e.values());
        self.levels.push(level as u32);
        self.links.push(vec![Vec::new(); level + 1]);

        let Some(entry) = self.entry else {
            self.entry = Some(idx);
            return Ok(());
        };

        let q = e.values().to_vec();
        let top = self.levels[entry as usize] as usize;
        let mut ep = entry;
        for layer in (level + 1..=top).rev() {
            ep = self.greedy_search(&q, ep, layer);
        }

        for layer in (0..=level.min(top)).rev() {
            let found = self.search_layer(&q, &[ep], self.cfg.ef_construction, layer);
            let limit = self.cfg.max_degree(layer);
            let neighbors = self.select_neighbors(&found, limit);
            self.links[idx as usize][layer] = neighbors.clone();
            for nb in neighbors {
                self.links[nb as usize][layer].push(idx);
                if self.links[nb as usize][layer].len() > limit {
                    self.prune_neighbors(nb, layer, limit);
                }
            }
            ep = found[0].idx;
        }

        if level > top {
            self.entry = Some(idx);
        }
        Ok(())
    }

    /// k nearest neighbors by cosine, using the stored `ef_search`.
    pub fn search(&self, q: &Embedding<S>, k: usize) -> Result<Vec<(String, S)>, HnswError> {
        self.search_ef(q, k, self.cfg.ef_search)
    }

    /// k nearest neighbors with an explicit beam width (raised to `k` when
    /// smaller). Results sorted by cosine descending, ties by ascending id.
    pub fn search_ef(
        &self,
        q: &Embedding<S>,
        k: usize,
        ef: usize,
    ) -> Result<Vec<(String, S)>, HnswError> {
        let Some(entry) = self.entry else {
            return Ok(Vec::new());
        };
        if q.dim() != self.dim {
            return Err(HnswError::DimensionMismatch {
                expected: self.dim,
                got: q.dim(),
            });
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        // Beam-descend through every layer instead of walking a single
        // greedy path: queries that sit far from every indexed point (short
        // fragments against whole snippets) otherwise drop into the wrong
        // cluster basin on the upper layers and layer 0 cannot recover.
        let qv = q.values();
        let ef = ef.max(k);
        let mut entries = vec![entry];
        for layer in (1..=self.levels[entry as usize] as usize).rev() {
            let found = self.search_layer(qv, &entries, ef, layer);
            entries = found.into_iter().map(|c| c.idx).collect();
        }
        let found = self.search_layer(qv, &entries, ef, 0);
        let mut out: Vec<(String, S)> = found
            .into_iter()
            .map(|c| (self.ids[c.idx as usize].clone(), S::one() - c.dist))
            .collect();
        out.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.0.cmp(&b.0))
        });
        out.truncate(k);
        Ok(out)
    }

    /// Structural invariants: degree bounds, link validity, entry level.
    /// Returns a list of violations (empty when the graph is sound).
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let mut max_level = 0usize;
        for (i, per_node) in self.links.iter().enumerate() {
            let lv = self.levels[i] as usize;
            max_level = max_level.max(lv);
            if per_node.len() != lv + 1 {
                problems.push(format!("node {i}: {} layers, level {lv}", per_node.len()));
                continue;
            }
            for (layer, list) in per_node.iter().enumerate() {
                if list.len() > self.cfg.max_degree(layer) {
                    problems.push(format!(
                        "node {i} layer {layer}: degree {} exceeds {}",
                        list.len(),
                        self.cfg.max_degree(layer)
                    ));
                }
                let mut seen = HashSet::new();
                for &nb in list {
                    if nb as usize >= self.len() {
                        problems.push(format!("node {i} layer {layer}: dangling link {nb}"));
                    } else if (self.levels[nb as usize] as usize) < layer {
                        problems.push(format!(
                            "node {i} layer {layer}: link to node {nb} with level {}",
                            self.levels[nb as usize]
                        ));
                    }
                    if !seen.insert(nb) {
                        problems.push(format!("node {i} layer {layer}: duplicate link {nb}"));
                    }
                    if nb == i as u32 {
                        problems.push(format!("node {i} layer {layer}: self link"));
                    }
                }
            }
        }
        match self.entry {
            Some(e) if (self.levels[e as usize] as usize) < max_level => {
                problems.push(format!(
                    "entry point level {} below graph max level {max_level}",
                    self.levels[e as usize]
                ));
            }
            None if !self.is_empty() => problems.push("non-empty graph without entry".into()),
            _ => {}
        }
        problems
    }

    /// Ids not reachable from the entry point on layer 0.
    pub fn unreachable_on_base_layer(&self) -> Vec<String> {
        let Some(entry) = self.entry else {
            return Vec::new();
        };
        let mut seen = vec![false; self.len()];
        let mut stack = vec![entry];
        seen[entry as usize] = true;
        while let Some(n) = stack.pop() {
            for &nb in &self.links[n as usize][0] {
                if !seen[nb as usize] {
                    seen[nb as usize] = true;
                    stack.push(nb);
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| !**s)
            .map(|(i, _)| self.ids[i].clone())
            .collect()
    }

    // ---- persistence ----

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(HNSW_MAGIC);
        out.push(S::BYTE_WIDTH);
        binio::w_u32(&mut out, self.dim as u32);
        binio::w_u32(&mut out, self.cfg.m as u32);
        binio::w_u32(&mut out, self.cfg.ef_construction as u32);
        binio::w_u32(&mut out, self.cfg.ef_search as u32);
        binio::w_u64(&mut out, self.cfg.seed);
        binio::w_u64(&mut out, self.insert_counter);
        binio::w_u64(&mut out, self.len() as u64);
        binio::w_u32(&mut out, self.entry.unwrap_or(u32::MAX));
        for (i, id) in self.ids.iter().enumerate() {
            binio::w_str(&mut out, id);
            binio::w_u32(&mut out, self.levels[i]);
            for v in self.vector(i as u32) {
                v.write_le(&mut out);
            }
        }
        for per_node in &self.links {
            for list in per_node {
                binio::w_u32(&mut out, list.len() as u32);
                for &nb in list {
                    binio::w_u32(&mut out, nb);
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, HnswError> {
        let mut r = Reader::new(buf);
        r.magic(HNSW_MAGIC)?;
        let width = r.u8()?;
        if width != S::BYTE_WIDTH {
            return Err(HnswError::Corrupt(format!(
                "scalar width {width} in file, expected {}",
                S::BYTE_WIDTH
            )));
        }
        let dim = r.u32()? as usize;
        let m = r.u32()? as usize;
        let ef_construction = r.u32()? as usize;
        let ef_search = r.u32()? as usize;
        let seed = r.u64()?;
        let insert_counter = r.u64()?;
        let count = r.u64()? as usize;
        let entry_raw = r.u32()?;
        let cfg = HnswConfig {
            m,
            ef_construction,
            ef_search,
            seed,
        };
        let mut g = Self::new(dim, cfg)?;
        g.insert_counter = insert_counter;
        for i in 0..count {
            let id = r.str()?;
            let level = r.u32()?;
            let mut vec_bytes = Vec::with_capacity(dim);
            for _ in 0..dim {
                let raw = r.bytes(width as usize)?;
                vec_bytes.push(S::read_le(raw));
            }
            if g.id_to_idx.contains_key(&id) {
                return Err(HnswError::DuplicateId(id));
            }
            g.id_to_idx.insert(id.clone(), i as u32);
            g.ids.push(id);
            g.levels.push(level);
            g.vectors.extend_from_slice(&vec_bytes);
        }
        for i in 0..count {
            let mut per_node = Vec::with_capacity(g.levels[i] as usize + 1);
            for _ in 0..=g.levels[i] {
                let len = r.u32()? as usize;
                let mut list = Vec::with_capacity(len);
                for _ in 0..len {
                    list.push(r.u32()?);
                }
                per_node.push(list);
            }
            g.links.push(per_node);
        }
        r.finish()?;
        g.entry = if entry_raw == u32::MAX {
            None
        } else {
            Some(entry_raw)
        };
        if count > 0 && g.entry.is_none() {
            return Err(HnswError::Corrupt("non-empty graph without entry point".into()));
        }
        if let Some(e) = g.entry {
            if e as usize >= count {
                return Err(HnswError::Corrupt(format!("entry point {e} out of range")));
            }
        }
        let problems = g.check_invariants();
        if !problems.is_empty() {
            return Err(HnswError::Corrupt(problems.join("; ")));
        }
        Ok(g)
    }

    pub fn save(&self, path: &Path) -> Result<(), HnswError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, HnswError> {
        let buf = std::fs::read(path)?;
        Self::from_bytes(&buf)
    }
}

/// Bulk build: sequential inserts in input order.
pub fn build<S: Scalar>(
    dim: usize,
    items: &[(String, Embedding<S>)],
    cfg: HnswConfig,
) -> Result<HnswGraph<S>, HnswError> {
    let mut g = HnswGraph::new(dim, cfg)?;
    for (id, e) in items {
        g.insert(id, e)?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::synth::random_unit_embeddings;

    fn items(n: usize, dim: usize, seed: u64) -> Vec<(String, Embedding<f32>)> {
        random_unit_embeddings::<f32>(n, dim, seed)
            .into_iter()
            .enumerate()
            .map(|(i, e)| (format!("v{i:04}"), e))
            .collect()
    }

    #[test]
    fn first_insert_becomes_entry_with_no_edges() {
        let mut g: HnswGraph<f32> = HnswGraph::new(4, HnswConfig::default()).unwrap();
        let e = Embedding::from_raw(vec![1.0, 0.0, 0.0, 0.0]);
        g.insert("a", &e).unwrap();
        assert_eq!(g.entry_point(), Some("a"));
        assert_eq!(g.total_edges(), 0);
    }

    #[test]
    fn second_insert_links_mutually_on_shared_levels() {
        let mut g: HnswGraph<f32> = HnswGraph::new(4, HnswConfig::default()).unwrap();
        g.insert("a", &Embedding::from_raw(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        g.insert("b", &Embedding::from_raw(vec![0.0, 1.0, 0.0, 0.0])).unwrap();
        let shared = (g.levels[0].min(g.levels[1])) as usize;
        for layer in 0..=shared {
            assert_eq!(g.links[0][layer], vec![1], "layer {layer}");
            assert_eq!(g.links[1][layer], vec![0], "layer {layer}");
        }
    }

    #[test]
    fn duplicate_and_mismatched_inserts_rejected() {
        let mut g: HnswGraph<f32> = HnswGraph::new(4, HnswConfig::default()).unwrap();
        let e = Embedding::from_raw(vec![1.0, 0.0, 0.0, 0.0]);
        g.insert("a", &e).unwrap();
        assert!(matches!(g.insert("a", &e), Err(HnswError::DuplicateId(_))));
        let wrong = Embedding::from_raw(vec![1.0, 0.0]);
        assert!(matches!(
            g.insert("b", &wrong),
            Err(HnswError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            g.insert("z", &Embedding::zero(4)),
            Err(HnswError::ZeroEmbedding(_))
        ));
    }

    #[test]
    fn invariants_and_reachability_on_random_graph() {
        let its = items(200, 16, 11);
        let g = build(16, &its, HnswConfig::default()).unwrap();
        assert!(g.check_invariants().is_empty());
        assert!(g.unreachable_on_base_layer().is_empty());
    }

    #[test]
    fn exact_vector_found_first() {
        let its = items(50, 32, 5);
        let g = build(32, &its, HnswConfig::default()).unwrap();
        let (want_id, q) = &its[17];
        let got = g.search(q, 3).unwrap();
        assert_eq!(&got[0].0, want_id);
        assert!((got[0].1 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn k_at_least_n_returns_everything() {
        let its = items(20, 8, 9);
        let g = build(8, &its, HnswConfig::default()).unwrap();
        let got = g.search(&its[0].1, 50).unwrap();
        assert_eq!(got.len(), 20);
    }

    #[test]
    fn empty_graph_returns_empty() {
        let g: HnswGraph<f32> = HnswGraph::new(8, HnswConfig::default()).unwrap();
        let q = Embedding::from_raw(vec![1.0; 8]);
        assert!(g.search(&q, 5).unwrap().is_empty());
    }

    #[test]
    fn recall_against_brute_force() {
        let its = items(1000, 32, 23);
        let g = build(32, &its, HnswConfig::default()).unwrap();
        let queries = random_unit_embeddings::<f32>(50, 32, 97);
        let k = 10;
        let mut hit = 0usize;
        let mut total = 0usize;
        for q in &queries {
            let mut exact: Vec<(f32, &str)> = its
                .iter()
                .map(|(id, e)| (dot_unchecked(q.values(), e.values()), id.as_str()))
                .collect();
            exact.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
            let want: HashSet<&str> = exact.iter().take(k).map(|(_, id)| *id).collect();
            let got = g.search(q, k).unwrap();
            hit += got.iter().filter(|(id, _)| want.contains(id.as_str())).count();
            total += k;
        }
        let recall = hit as f64 / total as f64;
        assert!(recall >= 0.9, "recall@10 = {recall}");
    }

    #[test]
    fn build_is_deterministic_and_rebuild_matches() {
        let its = items(500, 16, 31);
        let a = build(16, &its, HnswConfig::default()).unwrap();
        let b = build(16, &its, HnswConfig::default()).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        let q = random_unit_embeddings::<f32>(5, 16, 1234);
        for query in &q {
            assert_eq!(a.search(query, 10).unwrap(), b.search(query, 10).unwrap());
        }
    }

    #[test]
    fn persistence_roundtrip() {
        let its = items(120, 8, 77);
        let g = build(8, &its, HnswConfig::default()).unwrap();
        let back: HnswGraph<f32> = HnswGraph::from_bytes(&g.to_bytes()).unwrap();
        assert_eq!(g, back);
        let q = &its[3].1;
        assert_eq!(g.search(q, 5).unwrap(), back.search(q, 5).unwrap());
    }

    #[test]
    fn load_rejects_bad_magic_and_wrong_width() {
        let its = items(10, 8, 3);
        let g = build(8, &its, HnswConfig::default()).unwrap();
        let mut bytes = g.to_bytes();
        bytes[2] = b'X';
        assert!(HnswGraph::<f32>::from_bytes(&bytes).is_err());
        let bytes = g.to_bytes();
        assert!(matches!(
            HnswGraph::<f64>::from_bytes(&bytes),
            Err(HnswError::Corrupt(_))
        ));
    }

    #[test]
    fn level_distribution_within_band() {
        let cfg = HnswConfig::default();
        let n = 10_000;
        let with_level_ge_1 = (0..n)
            .filter(|&i| level_sample(cfg.seed, i, cfg.ml()) >= 1)
            .count();
        let frac = with_level_ge_1 as f64 / n as f64;
        let m = cfg.m as f64;
        assert!(
            frac >= 0.5 / m && frac <= 2.0 / m,
            "fraction with level >= 1: {frac}"
        );
    }

    #[test]
    fn degree_bound_holds_after_many_inserts() {
        let its = items(300, 8, 13);
        let g = build(8, &its, HnswConfig { m: 4, ef_construction: 16, ef_search: 16, seed: 2 })
            .unwrap();
        for (i, per_node) in g.links.iter().enumerate() {
            for (layer, list) in per_node.iter().enumerate() {
                assert!(
                    list.len() <= g.cfg.max_degree(layer),
                    "node {i} layer {layer}: {}",
                    list.len()
                );
            }
        }
    }
}
