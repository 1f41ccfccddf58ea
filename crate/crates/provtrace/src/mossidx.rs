//! MOSS-style retrieval over an inverted fingerprint index.
//!
//! Documents are winnowed into fingerprint sets stored both per-document and
//! as postings (hash -> sorted doc ids). A query fingerprints the fragment,
//! drops hashes more frequent than the document-frequency threshold, walks
//! the surviving posting lists rarest-first under a fixed budget, and
//! re-ranks the candidate union by exact Jaccard similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::binio::{self, BinError, Reader};
use crate::canon::SourceText;
use crate::winnow::{fingerprint, jaccard, FingerprintSet, Mark, WinnowConfig};

pub const MOSS_MAGIC: &[u8; 8] = b"MOSSIDX1";

/// Query-time knobs for the budgeted retrieval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MossConfig {
    /// Maximum document frequency, as a fraction of indexed documents, for a
    /// query hash to be used.
    pub freq_threshold: f64,
    /// Maximum number of posting lists inspected per query.
    pub budget: usize,
    /// Result count.
    pub top_k: usize,
}

impl Default for MossConfig {
    fn default() -> Self {
        Self {
            freq_threshold: 0.005,
            budget: 64,
            top_k: 10,
        }
    }
}

#[derive(Debug, Error)]
pub enum MossError {
    #[error("duplicate doc id: {0}")]
    DuplicateDocId(String),
    #[error("winnow config mismatch: index k={index_k},w={index_w} vs query k={query_k},w={query_w}")]
    ConfigMismatch {
        index_k: usize,
        index_w: usize,
        query_k: usize,
        query_w: usize,
    },
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("index file: {0}")]
    Format(#[from] BinError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl MossConfig {
    pub fn validate(&self) -> Result<(), MossError> {
        if !(self.freq_threshold > 0.0 && self.freq_threshold <= 1.0) {
            return Err(MossError::BadConfig(format!(
                "freq_threshold must be in (0, 1], got {}",
                self.freq_threshold
            )));
        }
        if self.budget < 1 {
            return Err(MossError::BadConfig("budget must be >= 1".into()));
        }
        if self.top_k < 1 {
            return Err(MossError::BadConfig("top_k must be >= 1".into()));
        }
        Ok(())
    }
}

/// One ranked candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredDoc {
    pub doc_id: String,
    pub score: f64,
}

pub type Ranking = Vec<ScoredDoc>;

/// Counters for the budgeted query path.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QueryStats {
    /// Posting lists consumed; never exceeds the budget.
    pub lists_inspected: usize,
    /// Size of the candidate set that was re-ranked.
    pub candidates: usize,
    /// Query hashes dropped by the frequency filter.
    pub filtered_hashes: usize,
}

/// Inverted index: fingerprint hash -> sorted list of document indices, plus
/// the full per-document fingerprint sets for O(candidates) re-ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    wcfg: WinnowConfig,
    doc_ids: Vec<String>,
    id_to_idx: HashMap<String, u32>,
    doc_fps: Vec<FingerprintSet>,
    postings: BTreeMap<u16, Vec<u32>>,
}

impl InvertedIndex {
    pub fn new(wcfg: WinnowConfig) -> Result<Self, MossError> {
        wcfg.validate()
            .map_err(|e| MossError::BadConfig(e.to_string()))?;
        Ok(Self {
            wcfg,
            doc_ids: Vec::new(),
            id_to_idx: HashMap::new(),
            doc_fps: Vec::new(),
            postings: BTreeMap::new(),
        })
    }

    pub fn winnow_config(&self) -> &WinnowConfig {
        &self.wcfg
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn contains(&self, id: &str) -> bool {
        self.id_to_idx.contains_key(id)
    }

    pub fn doc_fingerprints(&self, id: &str) -> Option<&FingerprintSet> {
        self.id_to_idx.get(id).map(|&i| &self.doc_fps[i as usize])
    }

    /// Document frequency of a hash.
    pub fn df(&self, hash: u16) -> usize {
        self.postings.get(&hash).map_or(0, Vec::len)
    }

    /// Posting list (sorted doc indices) of a hash.
    pub fn posting(&self, hash: u16) -> Option<&[u32]> {
        self.postings.get(&hash).map(Vec::as_slice)
    }

    /// Internal index of a doc id (its ingest position).
    pub fn doc_index(&self, id: &str) -> Option<u32> {
        self.id_to_idx.get(id).copied()
    }

    pub fn distinct_hashes(&self) -> usize {
        self.postings.len()
    }

    pub fn postings_entries(&self) -> usize {
        self.postings.values().map(Vec::len).sum()
    }

    /// Index one document from its precomputed fingerprints. Documents with
    /// empty fingerprint sets are indexed with no postings and are reachable
    /// only through the exhaustive scan.
    pub fn insert_fingerprints(
        &mut self,
        id: &str,
        fps: FingerprintSet,
    ) -> Result<(), MossError> {
        if self.id_to_idx.contains_key(id) {
            return Err(MossError::DuplicateDocId(id.to_string()));
        }
        let idx = self.doc_ids.len() as u32;
        for &h in fps.hashes() {
            self.postings.entry(h).or_default().push(idx);
        }
        self.id_to_idx.insert(id.to_string(), idx);
        self.doc_ids.push(id.to_string());
        self.doc_fps.push(fps);
        Ok(())
    }

    pub fn insert_doc(&mut self, id: &str, src: &SourceText) -> Result<(), MossError> {
        let fps = fingerprint(src, &self.wcfg);
        self.insert_fingerprints(id, fps)
    }

    fn check_config(&self, wcfg: &WinnowConfig) -> Result<(), MossError> {
        if *wcfg != self.wcfg {
            return Err(MossError::ConfigMismatch {
                index_k: self.wcfg.k,
                index_w: self.wcfg.w,
                query_k: wcfg.k,
                query_w: wcfg.w,
            });
        }
        Ok(())
    }

    /// Candidate documents reachable through the first `budget` surviving
    /// posting lists, rarest first. Hashes absent from the index have no
    /// posting list to consume and therefore do not count against the budget.
    fn gather_candidates(&self, fps: &FingerprintSet, cfg: &MossConfig) -> (BTreeSet<u32>, QueryStats) {
        let mut stats = QueryStats::default();
        let n = self.doc_count() as f64;
        let mut survivors: Vec<(usize, u16)> = Vec::new();
        for &h in fps.hashes() {
            let df = self.df(h);
            if df as f64 > cfg.freq_threshold * n {
                stats.filtered_hashes += 1;
                continue;
            }
            if df > 0 {
                survivors.push((df, h));
            }
        }
        survivors.sort_unstable();
        let mut candidates = BTreeSet::new();
        for &(_, h) in survivors.iter().take(cfg.budget) {
            stats.lists_inspected += 1;
            for &d in &self.postings[&h] {
                candidates.insert(d);
            }
        }
        stats.candidates = candidates.len();
        (candidates, stats)
    }

    fn rank(&self, fps: &FingerprintSet, docs: impl Iterator<Item = u32>, top_k: usize) -> Ranking {
        let mut scored: Vec<(f64, &str)> = docs
            .map(|d| {
                let d = d as usize;
                (jaccard(fps, &self.doc_fps[d]), self.doc_ids[d].as_str())
            })
            .collect();
        scored.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.1.cmp(b.1))
        });
        scored
            .into_iter()
            .take(top_k)
            .map(|(score, id)| ScoredDoc {
                doc_id: id.to_string(),
                score,
            })
            .collect()
    }

    /// Budgeted query from precomputed fragment fingerprints.
    pub fn query_fingerprints(
        &self,
        fps: &FingerprintSet,
        cfg: &MossConfig,
    ) -> Result<(Ranking, QueryStats), MossError> {
        cfg.validate()?;
        if fps.is_empty() {
            return Ok((Ranking::new(), QueryStats::default()));
        }
        let (candidates, stats) = self.gather_candidates(fps, cfg);
        Ok((self.rank(fps, candidates.into_iter(), cfg.top_k), stats))
    }

    /// Fingerprint the fragment and run the budgeted query.
    pub fn query(
        &self,
        fragment: &SourceText,
        cfg: &MossConfig,
        wcfg: &WinnowConfig,
    ) -> Result<Ranking, MossError> {
        self.check_config(wcfg)?;
        let fps = fingerprint(fragment, &self.wcfg);
        Ok(self.query_fingerprints(&fps, cfg)?.0)
    }

    /// Test oracle: Jaccard against every indexed document, no filtering, no
    /// budget; same sort rule as the budgeted query.
    pub fn exhaustive_rank(
        &self,
        fragment: &SourceText,
        top_k: usize,
        wcfg: &WinnowConfig,
    ) -> Result<Ranking, MossError> {
        self.check_config(wcfg)?;
        let fps = fingerprint(fragment, &self.wcfg);
        Ok(self.exhaustive_rank_fingerprints(&fps, top_k))
    }

    pub fn exhaustive_rank_fingerprints(&self, fps: &FingerprintSet, top_k: usize) -> Ranking {
        self.rank(fps, 0..self.doc_count() as u32, top_k)
    }

    // ---- persistence ----

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MOSS_MAGIC);
        binio::w_u32(&mut out, self.wcfg.k as u32);
        binio::w_u32(&mut out, self.wcfg.w as u32);
        binio::w_u64(&mut out, self.doc_count() as u64);
        for (id, fps) in self.doc_ids.iter().zip(&self.doc_fps) {
            binio::w_str(&mut out, id);
            binio::w_u32(&mut out, fps.marks().len() as u32);
            for m in fps.marks() {
                binio::w_u16(&mut out, m.hash);
                binio::w_u32(&mut out, m.pos);
            }
        }
        binio::w_u32(&mut out, self.postings.len() as u32);
        for (&h, docs) in &self.postings {
            binio::w_u16(&mut out, h);
            binio::w_u32(&mut out, docs.len() as u32);
            for &d in docs {
                binio::w_u32(&mut out, d);
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, MossError> {
        let mut r = Reader::new(buf);
        r.magic(MOSS_MAGIC)?;
        let k = r.u32()? as usize;
        let w = r.u32()? as usize;
        let mut idx = Self::new(WinnowConfig { k, w })?;
        let n = r.u64()? as usize;
        for _ in 0..n {
            let id = r.str()?;
            let marks_len = r.u32()? as usize;
            let mut marks = Vec::with_capacity(marks_len);
            for _ in 0..marks_len {
                let hash = r.u16()?;
                let pos = r.u32()?;
                marks.push(Mark { hash, pos });
            }
            let fps = FingerprintSet::from_marks(marks);
            if idx.id_to_idx.contains_key(&id) {
                return Err(MossError::DuplicateDocId(id));
            }
            let di = idx.doc_ids.len() as u32;
            idx.id_to_idx.insert(id.clone(), di);
            idx.doc_ids.push(id);
            idx.doc_fps.push(fps);
        }
        let distinct = r.u32()? as usize;
        for _ in 0..distinct {
            let h = r.u16()?;
            let len = r.u32()? as usize;
            let mut docs = Vec::with_capacity(len);
            let mut prev: Option<u32> = None;
            for _ in 0..len {
                let d = r.u32()?;
                if d as usize >= n {
                    return Err(BinError::Invalid(format!("posting doc index {d} out of range")).into());
                }
                if prev.map_or(false, |p| p >= d) {
                    return Err(BinError::Invalid(format!(
                        "posting list for hash {h} not strictly sorted"
                    ))
                    .into());
                }
                prev = Some(d);
                docs.push(d);
            }
            idx.postings.insert(h, docs);
        }
        r.finish()?;
        Ok(idx)
    }

    pub fn save(&self, path: &Path) -> Result<(), MossError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MossError> {
        let buf = std::fs::read(path)?;
        Self::from_bytes(&buf)
    }
}

/// Build an index over `(doc id, text)` pairs; fingerprinting runs in
/// parallel, insertion order is the input order.
pub fn build_index(
    docs: &[(String, SourceText)],
    wcfg: &WinnowConfig,
) -> Result<InvertedIndex, MossError> {
    let mut idx = InvertedIndex::new(*wcfg)?;
    let fps: Vec<FingerprintSet> = docs
        .par_iter()
        .map(|(_, src)| fingerprint(src, wcfg))
        .collect();
    for ((id, _), f) in docs.iter().zip(fps) {
        idx.insert_fingerprints(id, f)?;
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, text: &str) -> (String, SourceText) {
        (id.to_string(), SourceText::new(text))
    }

    fn oracle_cfg(idx: &InvertedIndex, fps: &FingerprintSet) -> MossConfig {
        MossConfig {
            freq_threshold: 1.0,
            budget: fps.distinct_hashes().max(1),
            top_k: idx.doc_count().max(1),
        }
    }

    const SNIPPETS: [&str; 5] = [
        "fn alpha(x: u32) -> u32 { x.wrapping_mul(2654435761) ^ 0x9e37 }",
        "def beta(items):\n    return [i * i for i in items if i % 3]\n",
        "int gamma(int n) { int s = 0; for (int i = 0; i < n; i++) s += i; return s; }",
        "let delta = (a, b) => a.concat(b).filter(Boolean).join('-');",
        "SELECT epsilon, COUNT(*) FROM zeta GROUP BY epsilon HAVING COUNT(*) > 2",
    ];

    fn small_corpus() -> Vec<(String, SourceText)> {
        SNIPPETS
            .iter()
            .enumerate()
            .map(|(i, s)| doc(&format!("doc-{i}"), s))
            .collect()
    }

    #[test]
    fn empty_build() {
        let idx = build_index(&[], &WinnowConfig::default()).unwrap();
        assert_eq!(idx.doc_count(), 0);
        assert_eq!(idx.distinct_hashes(), 0);
    }

    #[test]
    fn duplicate_id_rejected_with_offender() {
        let docs = vec![doc("same", "abcdefghij"), doc("same", "other text here")];
        match build_index(&docs, &WinnowConfig::default()) {
            Err(MossError::DuplicateDocId(id)) => assert_eq!(id, "same"),
            other => panic!("expected duplicate error, got {other:?}"),
        }
    }

    #[test]
    fn identical_docs_share_every_posting() {
        let docs = vec![doc("a", SNIPPETS[0]), doc("b", SNIPPETS[0])];
        let idx = build_index(&docs, &WinnowConfig::default()).unwrap();
        for (_, list) in &idx.postings {
            assert_eq!(list.as_slice(), &[0, 1]);
        }
    }

    #[test]
    fn postings_match_brute_force_map() {
        let wcfg = WinnowConfig::default();
        let docs = small_corpus()[..3].to_vec();
        let idx = build_index(&docs, &wcfg).unwrap();
        // independent construction: hash -> set of doc indices
        let mut expect: BTreeMap<u16, BTreeSet<u32>> = BTreeMap::new();
        for (i, (_, src)) in docs.iter().enumerate() {
            for &h in fingerprint(src, &wcfg).hashes() {
                expect.entry(h).or_default().insert(i as u32);
            }
        }
        assert_eq!(idx.postings.len(), expect.len());
        for (h, set) in expect {
            let got = &idx.postings[&h];
            assert_eq!(got.iter().copied().collect::<BTreeSet<u32>>(), set);
        }
    }

    #[test]
    fn exact_copy_ranks_first_with_unit_score() {
        let wcfg = WinnowConfig::default();
        let idx = build_index(&small_corpus(), &wcfg).unwrap();
        let frag = SourceText::new(SNIPPETS[2]);
        let fps = fingerprint(&frag, &wcfg);
        let cfg = oracle_cfg(&idx, &fps);
        let (ranking, stats) = idx.query_fingerprints(&fps, &cfg).unwrap();
        assert_eq!(ranking[0].doc_id, "doc-2");
        assert_eq!(ranking[0].score, 1.0);
        assert!(stats.lists_inspected <= cfg.budget);
    }

    #[test]
    fn no_shared_fingerprint_yields_empty_candidates() {
        let wcfg = WinnowConfig::default();
        let idx = build_index(&small_corpus(), &wcfg).unwrap();
        let ranking = idx
            .query(
                &SourceText::new("~~~~ ???? %%%% @@@@ ~~~~ ???? %%%%"),
                &MossConfig {
                    freq_threshold: 1.0,
                    budget: 64,
                    top_k: 5,
                },
                &wcfg,
            )
            .unwrap();
        assert!(ranking.iter().all(|r| r.score == 0.0) || ranking.is_empty());
        // the fragment shares nothing; candidates must be empty,
        // so the ranking is too
        assert!(ranking.is_empty());
    }

    #[test]
    fn empty_fragment_yields_empty_result() {
        let wcfg = WinnowConfig::default();
        let idx = build_index(&small_corpus(), &wcfg).unwrap();
        let ranking = idx
            .query(&SourceText::new(""), &MossConfig::default(), &wcfg)
            .unwrap();
        assert!(ranking.is_empty());
    }

    #[test]
    fn config_mismatch_is_an_error() {
        let idx = build_index(&small_corpus(), &WinnowConfig::default()).unwrap();
        let other = WinnowConfig { k: 7, w: 4 };
        assert!(matches!(
            idx.query(&SourceText::new("abc"), &MossConfig::default(), &other),
            Err(MossError::ConfigMismatch { .. })
        ));
    }

    #[test]
    fn exhaustive_rank_single_doc() {
        let wcfg = WinnowConfig::default();
        let idx = build_index(&[doc("only", SNIPPETS[0])], &wcfg).unwrap();
        let r = idx
            .exhaustive_rank(&SourceText::new(SNIPPETS[0]), 3, &wcfg)
            .unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].doc_id, "only");
        assert_eq!(r[0].score, 1.0);
    }

    #[test]
    fn exhaustive_rank_tie_broken_by_doc_id() {
        let wcfg = WinnowConfig::default();
        let docs = vec![doc("z", SNIPPETS[1]), doc("a", SNIPPETS[1])];
        let idx = build_index(&docs, &wcfg).unwrap();
        let r = idx
            .exhaustive_rank(&SourceText::new(SNIPPETS[1]), 2, &wcfg)
            .unwrap();
        assert_eq!(r[0].doc_id, "a");
        assert_eq!(r[1].doc_id, "z");
        assert_eq!(r[0].score, r[1].score);
    }

    #[test]
    fn exhaustive_agrees_with_pairwise_jaccard() {
        let wcfg = WinnowConfig::default();
        let docs: Vec<_> = (0..20)
            .map(|i| {
                doc(
                    &format!("d{i:02}"),
                    &format!("fn f{i}(v: u64) -> u64 {{ v * {i} + {} }}", i * 37),
                )
            })
            .collect();
        let idx = build_index(&docs, &wcfg).unwrap();
        let frag = SourceText::new("fn f7(v: u64) -> u64 { v * 7 + 259 }");
        let got = idx.exhaustive_rank(&frag, docs.len(), &wcfg).unwrap();
        // independent pairwise computation
        let qf = fingerprint(&frag, &wcfg);
        let mut expect: Vec<(String, f64)> = docs
            .iter()
            .map(|(id, src)| (id.clone(), jaccard(&qf, &fingerprint(src, &wcfg))))
            .collect();
        expect.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap()
                .then_with(|| a.0.cmp(&b.0))
        });
        let got_pairs: Vec<(String, f64)> =
            got.into_iter().map(|s| (s.doc_id, s.score)).collect();
        assert_eq!(got_pairs, expect);
    }

    #[test]
    fn oracle_settings_match_exhaustive_on_reachable_docs() {
        let wcfg = WinnowConfig::default();
        let idx = build_index(&small_corpus(), &wcfg).unwrap();
        for (_, src) in small_corpus() {
            let fps = fingerprint(&src, &wcfg);
            let cfg = oracle_cfg(&idx, &fps);
            let (q, _) = idx.query_fingerprints(&fps, &cfg).unwrap();
            let e: Ranking = idx
                .exhaustive_rank_fingerprints(&fps, idx.doc_count())
                .into_iter()
                .filter(|s| s.score > 0.0)
                .collect();
            assert_eq!(q, e);
        }
    }

    #[test]
    fn self_retrieval_ranks_first() {
        let wcfg = WinnowConfig::default();
        let idx = build_index(&small_corpus(), &wcfg).unwrap();
        for (id, src) in small_corpus() {
            let fps = fingerprint(&src, &wcfg);
            if fps.is_empty() {
                continue;
            }
            let cfg = oracle_cfg(&idx, &fps);
            let (r, _) = idx.query_fingerprints(&fps, &cfg).unwrap();
            assert_eq!(r[0].doc_id, id);
            assert_eq!(r[0].score, 1.0);
        }
    }

    #[test]
    fn empty_fingerprint_docs_only_reachable_exhaustively() {
        let wcfg = WinnowConfig::default();
        let docs = vec![doc("real", SNIPPETS[0]), doc("tiny", "ab")];
        let idx = build_index(&docs, &wcfg).unwrap();
        assert_eq!(idx.doc_count(), 2);
        let r = idx
            .exhaustive_rank(&SourceText::new(SNIPPETS[0]), 2, &wcfg)
            .unwrap();
        assert_eq!(r.len(), 2);
        assert!(r.iter().any(|s| s.doc_id == "tiny" && s.score == 0.0));
    }

    #[test]
    fn roundtrip_persistence() {
        let idx = build_index(&small_corpus(), &WinnowConfig::default()).unwrap();
        let bytes = idx.to_bytes();
        let back = InvertedIndex::from_bytes(&bytes).unwrap();
        assert_eq!(idx, back);
    }

    #[test]
    fn bad_magic_rejected() {
        let idx = build_index(&small_corpus(), &WinnowConfig::default()).unwrap();
        let mut bytes = idx.to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            InvertedIndex::from_bytes(&bytes),
            Err(MossError::Format(BinError::BadMagic { .. }))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn budget_growth_never_drops_candidates(
            texts in proptest::collection::vec("[a-f0-9 ;=()]{10,60}", 3..12),
            frag in "[a-f0-9 ;=()]{10,40}",
            b1 in 1usize..6,
            extra in 1usize..6,
        ) {
            let wcfg = WinnowConfig::default();
            let docs: Vec<_> = texts.iter().enumerate()
                .map(|(i, t)| doc(&format!("d{i}"), t)).collect();
            let idx = build_index(&docs, &wcfg).unwrap();
            let fps = fingerprint(&SourceText::new(&frag), &wcfg);
            prop_assume!(!fps.is_empty());
            let small = MossConfig { freq_threshold: 1.0, budget: b1, top_k: 64 };
            let big = MossConfig { freq_threshold: 1.0, budget: b1 + extra, top_k: 64 };
            let (c1, _) = idx.gather_candidates(&fps, &small);
            let (c2, _) = idx.gather_candidates(&fps, &big);
            prop_assert!(c1.is_subset(&c2));
        }

        #[test]
        fn inspected_lists_bounded_by_budget(
            texts in proptest::collection::vec("[a-f0-9 ;=()]{10,60}", 1..10),
            frag in "[a-f0-9 ;=()]{10,40}",
            budget in 1usize..10,
        ) {
            let wcfg = WinnowConfig::default();
            let docs: Vec<_> = texts.iter().enumerate()
                .map(|(i, t)| doc(&format!("d{i}"), t)).collect();
            let idx = build_index(&docs, &wcfg).unwrap();
            let fps = fingerprint(&SourceText::new(&frag), &wcfg);
            let cfg = MossConfig { freq_threshold: 1.0, budget, top_k: 8 };
            let (_, stats) = idx.query_fingerprints(&fps, &cfg).unwrap();
            prop_assert!(stats.lists_inspected <= budget);
        }
    }
}
