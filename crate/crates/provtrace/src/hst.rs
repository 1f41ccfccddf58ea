//! The hybrid two-stage pipeline and its on-disk collection store.
//!
//! A collection binds corpus records (snippet plus provenance metadata), the
//! inverted fingerprint index, and the vector graph. `trace` answers a query
//! in two stages: the graph retrieves the top candidates by cosine, then the
//! candidates are re-ranked by exact Jaccard over winnowing fingerprints.
//! Fragments that cannot be embedded (empty fingerprint set) fall back to
//! the budgeted inverted-index query so every query stays answerable.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::canon::SourceText;
use crate::embed::{embed_fingerprints, EmbedderKind, EmbedderSpec, EmbedError, Embedding};
use crate::hnsw::{HnswConfig, HnswError, HnswGraph};
use crate::mossidx::{InvertedIndex, MossConfig, MossError};
use crate::scalar::Scalar;
use crate::winnow::{fingerprint, jaccard, FingerprintSet, WinnowConfig};

pub mod integrity;

pub use integrity::{integrity_check_dir, CheckOutcome, IntegrityReport};

pub const MANIFEST_FILE: &str = "manifest.json";

/// Stage-1 beam width per requested candidate. Fragment queries sit far
/// from every whole-snippet embedding, so the correct snippet's graph
/// neighborhood only enters the beam when it is several times wider than
/// the candidate list itself.
const STAGE1_BEAM_FACTOR: usize = 5;
pub const RECORDS_FILE: &str = "records.jsonl";
pub const MOSS_FILE: &str = "moss.idx";
pub const HNSW_FILE: &str = "hnsw.idx";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const EMBEDDINGS_MAGIC: &[u8; 8] = b"PTEMBED1";
pub const MANIFEST_VERSION: u32 = 1;

/// One source snippet plus provenance metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub license: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

#[derive(Debug, Error)]
pub enum HstError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("fragment is empty")]
    EmptyFragment,
    #[error("unknown doc id: {0}")]
    UnknownDocId(String),
    #[error(transparent)]
    Moss(#[from] MossError),
    #[error(transparent)]
    Hnsw(#[from] HnswError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error("not a collection (missing or unreadable {0}): {1}")]
    NotACollection(String, String),
    #[error("collection corrupt: {0}")]
    Corrupt(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Build-time configuration for a collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub wcfg: WinnowConfig,
    pub embedder: EmbedderSpec,
    pub hnsw: HnswConfig,
}

impl IngestConfig {
    /// Coherent defaults: one winnow config feeding both the index and the
    /// fingerprint-hash embedder.
    pub fn fingerprint_hash(dim: usize, seed: u64) -> Self {
        let wcfg = WinnowConfig::default();
        Self {
            wcfg,
            embedder: EmbedderSpec::fingerprint_hash(dim, seed, wcfg),
            hnsw: HnswConfig {
                seed,
                ..HnswConfig::default()
            },
        }
    }

    pub fn validate(&self) -> Result<(), HstError> {
        self.wcfg
            .validate()
            .map_err(|e| HstError::BadConfig(e.to_string()))?;
        self.embedder
            .validate()
            .map_err(|e| HstError::BadConfig(e.to_string()))?;
        self.hnsw
            .validate()
            .map_err(|e| HstError::BadConfig(e.to_string()))?;
        if let EmbedderKind::FingerprintHash { wcfg, .. } = &self.embedder.kind {
            if *wcfg != self.wcfg {
                return Err(HstError::BadConfig(
                    "embedder winnow config differs from collection winnow config".into(),
                ));
            }
        }
        Ok(())
    }
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self::fingerprint_hash(1024, 42)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedRecord {
    /// 0-based position in the input stream.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub indexed: usize,
    pub rejected: Vec<RejectedRecord>,
    /// Docs without a usable embedding; they are invisible to the vector
    /// stage but still indexed for fingerprint retrieval.
    pub vector_invisible: Vec<String>,
}

/// Config plus build provenance; written last so partially written
/// directories are never loadable as complete collections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub created_unix: u64,
    pub wcfg: WinnowConfig,
    pub embedder: EmbedderSpec,
    pub hnsw: HnswConfig,
    pub doc_count: usize,
    pub rejected: Vec<RejectedRecord>,
    pub vector_invisible: Vec<String>,
    /// SHA-256 of each sibling file, filled in when saving.
    #[serde(default)]
    pub checksums: BTreeMap<String, String>,
}

/// Scores both stages attach to a returned candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub doc_id: String,
    /// Primary ordering score (the stage-2 Jaccard).
    pub score: f64,
    /// Stage-1 cosine; absent on the fingerprint-only fallback path.
    pub cosine: Option<f64>,
    pub jaccard: f64,
    pub author: Option<String>,
    pub license: Option<String>,
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryEcho {
    pub candidates: usize,
    pub top_k: usize,
    pub fragment_bytes: usize,
    pub fragment_fingerprints: usize,
    /// True when the zero-embedding fallback answered the query.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedResult {
    pub entries: Vec<TraceEntry>,
    pub query_echo: QueryEcho,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub stage1_ms: f64,
    pub stage2_ms: f64,
}

pub struct Collection<S: Scalar> {
    records: Vec<CorpusRecord>,
    id_to_idx: HashMap<String, u32>,
    moss: InvertedIndex,
    ann: HnswGraph<S>,
    manifest: Manifest,
}

impl<S: Scalar> Collection<S> {
    /// Build a collection: fingerprint and embed every record, reject bad
    /// ones (duplicate id, empty content, missing external vector has a
    /// softer fate: vector-invisible), and assemble both indexes.
    pub fn ingest(
        records: impl IntoIterator<Item = CorpusRecord>,
        cfg: IngestConfig,
    ) -> Result<Self, HstError> {
        cfg.validate()?;

        let mut accepted: Vec<CorpusRecord> = Vec::new();
        let mut rejected: Vec<RejectedRecord> = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for (index, rec) in records.into_iter().enumerate() {
            if rec.content.is_empty() {
                rejected.push(RejectedRecord {
                    index,
                    id: Some(rec.id),
                    reason: "empty content".into(),
                });
                continue;
            }
            if !seen.insert(rec.id.clone()) {
                rejected.push(RejectedRecord {
                    index,
                    id: Some(rec.id),
                    reason: "duplicate id".into(),
                });
                continue;
            }
            accepted.push(rec);
        }

        let fps: Vec<FingerprintSet> = accepted
            .par_iter()
            .map(|r| fingerprint(&SourceText::new(r.content.as_str()), &cfg.wcfg))
            .collect();

        let external = match &cfg.embedder.kind {
            EmbedderKind::External { source } => {
                let file = std::fs::File::open(source).map_err(|e| {
                    HstError::BadConfig(format!("external vector source {source}: {e}"))
                })?;
                Some(crate::embed::import_embeddings::<S>(
                    std::io::BufReader::new(file),
                    Some(cfg.embedder.dim),
                )?)
            }
            EmbedderKind::FingerprintHash { .. } => None,
        };

        let embeddings: Vec<Option<Embedding<S>>> = match &external {
            Some(map) => accepted
                .iter()
                .map(|r| map.get(&r.id).cloned())
                .collect(),
            None => fps
                .par_iter()
                .map(|f| Some(embed_fingerprints(f, &cfg.embedder).expect("validated spec")))
                .collect(),
        };

        let mut moss = InvertedIndex::new(cfg.wcfg)?;
        let mut ann = HnswGraph::new(cfg.embedder.dim, cfg.hnsw)?;
        let mut id_to_idx = HashMap::with_capacity(accepted.len());
        let mut vector_invisible = Vec::new();
        for (i, (rec, f)) in accepted.iter().zip(fps).enumerate() {
            moss.insert_fingerprints(&rec.id, f)?;
            id_to_idx.insert(rec.id.clone(), i as u32);
            match &embeddings[i] {
                Some(e) if !e.is_zero() => ann.insert(&rec.id, e)?,
                _ => vector_invisible.push(rec.id.clone()),
            }
        }

        let manifest = Manifest {
            version: MANIFEST_VERSION,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wcfg: cfg.wcfg,
            embedder: cfg.embedder,
            hnsw: cfg.hnsw,
            doc_count: accepted.len(),
            rejected,
            vector_invisible,
            checksums: BTreeMap::new(),
        };

        Ok(Self {
            records: accepted,
            id_to_idx,
            moss,
            ann,
            manifest,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn record(&self, id: &str) -> Option<&CorpusRecord> {
        self.id_to_idx.get(id).map(|&i| &self.records[i as usize])
    }

    pub fn moss(&self) -> &InvertedIndex {
        &self.moss
    }

    pub fn ann(&self) -> &HnswGraph<S> {
        &self.ann
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn winnow_config(&self) -> &WinnowConfig {
        &self.manifest.wcfg
    }

    pub fn fragment_fingerprints(&self, fragment: &SourceText) -> FingerprintSet {
        fingerprint(fragment, &self.manifest.wcfg)
    }

    /// Embed a fragment with the collection's embedder. External-vector
    /// collections cannot embed new fragments and report an error.
    pub fn embed_fragment(&self, fragment: &SourceText) -> Result<Embedding<S>, HstError> {
        let fps = self.fragment_fingerprints(fragment);
        Ok(embed_fingerprints(&fps, &self.manifest.embedder)?)
    }

    fn entry_for(&self, doc_id: &str, score: f64, cosine: Option<f64>, jacc: f64) -> TraceEntry {
        let rec = self.record(doc_id).expect("ranked doc exists");
        TraceEntry {
            doc_id: rec.id.clone(),
            score,
            cosine,
            jaccard: jacc,
            author: rec.author.clone(),
            license: rec.license.clone(),
            origin: rec.origin.clone(),
        }
    }

    /// Two-stage trace with stage timings.
    pub fn trace_timed(
        &self,
        fragment: &SourceText,
        candidates: usize,
        top_k: usize,
    ) -> Result<(RankedResult, StageTimings), HstError> {
        if fragment.content.is_empty() {
            return Err(HstError::EmptyFragment);
        }
        let frag_fps = self.fragment_fingerprints(fragment);
        let echo_base = |fallback: bool| QueryEcho {
            candidates,
            top_k,
            fragment_bytes: fragment.content.len(),
            fragment_fingerprints: frag_fps.distinct_hashes(),
            fallback,
        };

        let t0 = Instant::now();
        let query_emb = embed_fingerprints::<S>(&frag_fps, &self.manifest.embedder).ok();
        match query_emb {
            Some(emb) if !emb.is_zero() && !self.ann.is_empty() => {
                let ef = self
                    .ann
                    .config()
                    .ef_search
                    .max(candidates.saturating_mul(STAGE1_BEAM_FACTOR));
                let stage1 = self.ann.search_ef(&emb, candidates, ef)?;
                let stage1_ms = t0.elapsed().as_secs_f64() * 1e3;

                let t1 = Instant::now();
                let mut scored: Vec<(f64, f64, &str)> = stage1
                    .iter()
                    .map(|(id, cos)| {
                        let doc_fps = self.moss.doc_fingerprints(id).expect("indexed doc");
                        (
                            jaccard(&frag_fps, doc_fps),
                            cos.to_f64().unwrap_or(0.0),
                            id.as_str(),
                        )
                    })
                    .collect();
                scored.sort_by(|a, b| {
                    b.0.partial_cmp(&a.0)
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then_with(|| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal))
                        .then_with(|| a.2.cmp(b.2))
                });
                let entries: Vec<TraceEntry> = scored
                    .into_iter()
                    .take(top_k)
                    .map(|(j, cos, id)| self.entry_for(id, j, Some(cos), j))
                    .collect();
                let stage2_ms = t1.elapsed().as_secs_f64() * 1e3;
                Ok((
                    RankedResult {
                        entries,
                        query_echo: echo_base(false),
                    },
                    StageTimings {
                        stage1_ms,
                        stage2_ms,
                    },
                ))
            }
            _ => {
                // Zero-flagged embedding (or an external-vector collection):
                // answer with the budgeted fingerprint query instead.
                let stage1_ms = t0.elapsed().as_secs_f64() * 1e3;
                let t1 = Instant::now();
                let cfg = MossConfig {
                    top_k,
                    ..MossConfig::default()
                };
                let (ranking, _) = self.moss.query_fingerprints(&frag_fps, &cfg)?;
                let entries: Vec<TraceEntry> = ranking
                    .into_iter()
                    .map(|s| self.entry_for(&s.doc_id, s.score, None, s.score))
                    .collect();
                let stage2_ms = t1.elapsed().as_secs_f64() * 1e3;
                Ok((
                    RankedResult {
                        entries,
                        query_echo: echo_base(true),
                    },
                    StageTimings {
                        stage1_ms,
                        stage2_ms,
                    },
                ))
            }
        }
    }

    /// Stage 1: vector search for `candidates` ids. Stage 2: exact Jaccard
    /// re-rank, ties by cosine then doc id. Returns the `top_k` best.
    pub fn trace(
        &self,
        fragment: &SourceText,
        candidates: usize,
        top_k: usize,
    ) -> Result<RankedResult, HstError> {
        Ok(self.trace_timed(fragment, candidates, top_k)?.0)
    }

    // ---- persistence ----

    fn records_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("serializable record"));
            out.push('\n');
        }
        out
    }

    fn embeddings_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(EMBEDDINGS_MAGIC);
        out.push(S::BYTE_WIDTH);
        crate::binio::w_u32(&mut out, self.manifest.embedder.dim as u32);
        crate::binio::w_u64(&mut out, self.ann.len() as u64);
        for id in self.ann.ids() {
            crate::binio::w_str(&mut out, id);
            for v in self.ann.node_vector(id).expect("own id") {
                v.write_le(&mut out);
            }
        }
        out
    }

    /// Write the collection to a directory. The manifest goes last with
    /// checksums of the other files, so an interrupted save is not loadable.
    pub fn save_to_dir(&self, dir: &Path) -> Result<(), HstError> {
        std::fs::create_dir_all(dir)?;
        let files: [(&str, Vec<u8>); 4] = [
            (RECORDS_FILE, self.records_jsonl().into_bytes()),
            (MOSS_FILE, self.moss.to_bytes()),
            (HNSW_FILE, self.ann.to_bytes()),
            (EMBEDDINGS_FILE, self.embeddings_bytes()),
        ];
        let mut manifest = self.manifest.clone();
        manifest.checksums.clear();
        for (name, bytes) in &files {
            std::fs::write(dir.join(name), bytes)?;
            let digest = Sha256::digest(bytes);
            manifest
                .checksums
                .insert(name.to_string(), hex_string(&digest));
        }
        let manifest_json = serde_json::to_string_pretty(&manifest)?;
        std::fs::write(dir.join(MANIFEST_FILE), manifest_json)?;
        Ok(())
    }

    /// Load a collection directory. Headers and configs are validated;
    /// content checksums are left to `integrity_check_dir`.
    pub fn load_from_dir(dir: &Path) -> Result<Self, HstError> {
        let manifest_raw = std::fs::read_to_string(dir.join(MANIFEST_FILE))
            .map_err(|e| HstError::NotACollection(MANIFEST_FILE.into(), e.to_string()))?;
        let manifest: Manifest = serde_json::from_str(&manifest_raw)
            .map_err(|e| HstError::NotACollection(MANIFEST_FILE.into(), e.to_string()))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(HstError::Corrupt(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                manifest.version
            )));
        }

        let records_raw = std::fs::read_to_string(dir.join(RECORDS_FILE))
            .map_err(|e| HstError::NotACollection(RECORDS_FILE.into(), e.to_string()))?;
        let mut records = Vec::new();
        let mut id_to_idx = HashMap::new();
        for (i, line) in records_raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: CorpusRecord = serde_json::from_str(line)
                .map_err(|e| HstError::Corrupt(format!("{RECORDS_FILE} line {}: {e}", i + 1)))?;
            if id_to_idx.contains_key(&rec.id) {
                return Err(HstError::Corrupt(format!(
                    "{RECORDS_FILE}: duplicate id {}",
                    rec.id
                )));
            }
            id_to_idx.insert(rec.id.clone(), records.len() as u32);
            records.push(rec);
        }

        let moss = InvertedIndex::load(&dir.join(MOSS_FILE))?;
        if *moss.winnow_config() != manifest.wcfg {
            return Err(HstError::Corrupt(
                "moss.idx winnow config differs from manifest".into(),
            ));
        }
        let ann: HnswGraph<S> = HnswGraph::load(&dir.join(HNSW_FILE))?;
        if *ann.config() != manifest.hnsw {
            return Err(HstError::Corrupt(
                "hnsw.idx config differs from manifest".into(),
            ));
        }
        if ann.dim() != manifest.embedder.dim {
            return Err(HstError::Corrupt(format!(
                "hnsw.idx dim {} differs from embedder dim {}",
                ann.dim(),
                manifest.embedder.dim
            )));
        }

        // embeddings.bin: header sanity only (content belongs to integrity).
        let emb = std::fs::read(dir.join(EMBEDDINGS_FILE))
            .map_err(|e| HstError::NotACollection(EMBEDDINGS_FILE.into(), e.to_string()))?;
        let mut r = crate::binio::Reader::new(&emb);
        r.magic(EMBEDDINGS_MAGIC)
            .map_err(|e| HstError::Corrupt(format!("{EMBEDDINGS_FILE}: {e}")))?;
        let width = r.u8().map_err(|e| HstError::Corrupt(e.to_string()))?;
        let dim = r.u32().map_err(|e| HstError::Corrupt(e.to_string()))? as usize;
        if width != S::BYTE_WIDTH || dim != manifest.embedder.dim {
            return Err(HstError::Corrupt(format!(
                "{EMBEDDINGS_FILE}: width {width} dim {dim} do not match manifest"
            )));
        }

        Ok(Self {
            records,
            id_to_idx,
            moss,
            ann,
            manifest,
        })
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// Read a corpus JSONL file; invalid lines become per-line rejects instead
/// of failing the whole ingest.
pub fn read_corpus_jsonl(data: &str) -> (Vec<CorpusRecord>, Vec<RejectedRecord>) {
    let mut records = Vec::new();
    let mut rejects = Vec::new();
    for (i, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CorpusRecord>(line) {
            Ok(rec) => records.push(rec),
            Err(e) => rejects.push(RejectedRecord {
                index: i,
                id: None,
                reason: format!("line {}: {e}", i + 1),
            }),
        }
    }
    (records, rejects)
}
