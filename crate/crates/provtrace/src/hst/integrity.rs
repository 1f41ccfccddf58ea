//! Collection consistency audit.
//!
//! Verifies the cross-index invariants (id cover, posting membership, graph
//! structure, unit norms) and, in deep mode, rebuilds the indexes from the
//! records and byte-compares them against the stored ones, which flags any
//! tampering with seeds or index contents. Failures are report entries, not
//! errors.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{hex_string, Collection, EMBEDDINGS_FILE, HNSW_FILE, MOSS_FILE, RECORDS_FILE};
use crate::canon::{canonicalize, SourceText};
use crate::embed::{embed_fingerprints, EmbedderKind, Embedding};
use crate::hnsw::HnswGraph;
use crate::mossidx::InvertedIndex;
use crate::scalar::Scalar;
use crate::winnow::fingerprint;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegrityReport {
    pub passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl IntegrityReport {
    fn new() -> Self {
        Self {
            passed: true,
            checks: Vec::new(),
        }
    }

    fn push(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.passed &= passed;
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        });
    }

    fn ok(&mut self, name: &str) {
        self.push(name, true, "ok");
    }
}

impl<S: Scalar> Collection<S> {
    /// Run the in-memory invariant checks; `deep` additionally rebuilds the
    /// fingerprints, embeddings, and graph from the records and compares
    /// them byte-for-byte with the stored indexes.
    pub fn integrity_check(&self, deep: bool) -> IntegrityReport {
        let mut report = IntegrityReport::new();
        self.check_records(&mut report);
        self.check_id_cover(&mut report);
        self.check_postings(&mut report);
        self.check_graph(&mut report);
        self.check_norms(&mut report);
        if deep {
            self.check_rebuild(&mut report);
        }
        report
    }

    fn check_records(&self, report: &mut IntegrityReport) {
        let empty: Vec<&str> = self
            .records
            .iter()
            .filter(|r| r.content.is_empty())
            .map(|r| r.id.as_str())
            .collect();
        if empty.is_empty() {
            report.ok("records_nonempty");
        } else {
            report.push(
                "records_nonempty",
                false,
                format!("{} records with empty content: {:?}", empty.len(), empty),
            );
        }
        if self.id_to_idx.len() == self.records.len() {
            report.ok("records_unique_ids");
        } else {
            report.push(
                "records_unique_ids",
                false,
                format!(
                    "{} records but {} distinct ids",
                    self.records.len(),
                    self.id_to_idx.len()
                ),
            );
        }
    }

    fn check_id_cover(&self, report: &mut IntegrityReport) {
        let record_ids: BTreeSet<&str> = self.records.iter().map(|r| r.id.as_str()).collect();
        let moss_ids: BTreeSet<&str> = self.moss.doc_ids().iter().map(String::as_str).collect();
        if record_ids == moss_ids {
            report.ok("moss_id_cover");
        } else {
            let missing: Vec<&&str> = record_ids.difference(&moss_ids).collect();
            let extra: Vec<&&str> = moss_ids.difference(&record_ids).collect();
            report.push(
                "moss_id_cover",
                false,
                format!("missing from index: {missing:?}; not in records: {extra:?}"),
            );
        }

        let invisible: BTreeSet<&str> = self
            .manifest
            .vector_invisible
            .iter()
            .map(String::as_str)
            .collect();
        let expected: BTreeSet<&str> = record_ids.difference(&invisible).copied().collect();
        let ann_ids: BTreeSet<&str> = self.ann.ids().iter().map(String::as_str).collect();
        if expected == ann_ids {
            report.ok("ann_id_cover");
        } else {
            let missing: Vec<&&str> = expected.difference(&ann_ids).collect();
            let extra: Vec<&&str> = ann_ids.difference(&expected).collect();
            report.push(
                "ann_id_cover",
                false,
                format!("missing from graph: {missing:?}; unexpected: {extra:?}"),
            );
        }
    }

    fn check_postings(&self, report: &mut IntegrityReport) {
        let mut problems = Vec::new();
        let mut expected_entries = 0usize;
        for id in self.moss.doc_ids() {
            let idx = self.moss.doc_index(id).expect("own id");
            let fps = self.moss.doc_fingerprints(id).expect("own id");
            expected_entries += fps.distinct_hashes();
            for &h in fps.hashes() {
                match self.moss.posting(h) {
                    Some(list) if list.binary_search(&idx).is_ok() => {}
                    _ => problems.push(format!("doc {id}: hash {h} missing from postings")),
                }
            }
        }
        if self.moss.postings_entries() != expected_entries {
            problems.push(format!(
                "postings hold {} entries, fingerprints imply {}",
                self.moss.postings_entries(),
                expected_entries
            ));
        }
        if problems.is_empty() {
            report.ok("postings_consistent");
        } else {
            problems.truncate(5);
            report.push("postings_consistent", false, problems.join("; "));
        }
    }

    fn check_graph(&self, report: &mut IntegrityReport) {
        let problems = self.ann.check_invariants();
        if problems.is_empty() {
            report.ok("graph_invariants");
        } else {
            report.push("graph_invariants", false, problems.join("; "));
        }
        let unreachable = self.ann.unreachable_on_base_layer();
        if unreachable.is_empty() {
            report.ok("graph_reachability");
        } else {
            report.push(
                "graph_reachability",
                false,
                format!("{} nodes unreachable on layer 0", unreachable.len()),
            );
        }
    }

    fn check_norms(&self, report: &mut IntegrityReport) {
        let mut bad = Vec::new();
        for id in self.ann.ids() {
            let v = self.ann.node_vector(id).expect("own id");
            let norm = v
                .iter()
                .map(|x| {
                    let f = x.to_f64().unwrap_or(0.0);
                    f * f
                })
                .sum::<f64>()
                .sqrt();
            if (norm - 1.0).abs() > 1e-6 {
                bad.push(format!("{id}: norm {norm}"));
            }
        }
        if bad.is_empty() {
            report.ok("embedding_norms");
        } else {
            bad.truncate(5);
            report.push("embedding_norms", false, bad.join("; "));
        }
    }

    fn check_rebuild(&self, report: &mut IntegrityReport) {
        // Fingerprints and positions straight from the records.
        let mut fp_problems = Vec::new();
        for rec in &self.records {
            let src = SourceText::new(rec.content.as_str());
            let rebuilt = fingerprint(&src, &self.manifest.wcfg);
            match self.moss.doc_fingerprints(&rec.id) {
                Some(stored) if *stored == rebuilt => {}
                _ => fp_problems.push(rec.id.clone()),
            }
            let canonical = canonicalize(&src);
            let max_pos = canonical.char_count().saturating_sub(self.manifest.wcfg.k);
            if rebuilt
                .marks()
                .iter()
                .any(|m| m.pos as usize > max_pos)
            {
                fp_problems.push(format!("{}: mark position out of range", rec.id));
            }
        }
        if fp_problems.is_empty() {
            report.ok("rebuild_fingerprints");
        } else {
            fp_problems.truncate(5);
            report.push(
                "rebuild_fingerprints",
                false,
                format!("diverging docs: {fp_problems:?}"),
            );
        }

        // Index files must be reproducible from records and manifest config.
        let mut moss = match InvertedIndex::new(self.manifest.wcfg) {
            Ok(m) => m,
            Err(e) => {
                report.push("rebuild_moss", false, e.to_string());
                return;
            }
        };
        for rec in &self.records {
            if let Err(e) = moss.insert_doc(&rec.id, &SourceText::new(rec.content.as_str())) {
                report.push("rebuild_moss", false, e.to_string());
                return;
            }
        }
        if moss.to_bytes() == self.moss.to_bytes() {
            report.ok("rebuild_moss");
        } else {
            report.push(
                "rebuild_moss",
                false,
                "rebuilt inverted index differs from stored bytes",
            );
        }

        // Graph rebuild: recompute embeddings when the embedder allows it,
        // otherwise reuse the stored vectors, then re-run construction with
        // the manifest seed.
        let mut rebuilt = match HnswGraph::<S>::new(self.manifest.embedder.dim, self.manifest.hnsw)
        {
            Ok(g) => g,
            Err(e) => {
                report.push("rebuild_graph", false, e.to_string());
                return;
            }
        };
        for id in self.ann.ids() {
            let emb = match &self.manifest.embedder.kind {
                EmbedderKind::FingerprintHash { .. } => {
                    let fps = self.moss.doc_fingerprints(id).expect("indexed doc");
                    match embed_fingerprints::<S>(fps, &self.manifest.embedder) {
                        Ok(e) => e,
                        Err(e) => {
                            report.push("rebuild_graph", false, e.to_string());
                            return;
                        }
                    }
                }
                EmbedderKind::External { .. } => Embedding::from_unit_values(
                    self.ann.node_vector(id).expect("own id").to_vec(),
                ),
            };
            if let Err(e) = rebuilt.insert(id, &emb) {
                report.push("rebuild_graph", false, e.to_string());
                return;
            }
        }
        if rebuilt.to_bytes() == self.ann.to_bytes() {
            report.ok("rebuild_graph");
        } else {
            report.push(
                "rebuild_graph",
                false,
                "rebuilt graph differs from stored bytes (seed or data tampered?)",
            );
        }
    }
}

/// Audit a collection directory: file presence, header versions, manifest
/// checksums, then the in-memory checks. Load failures become failed checks.
pub fn integrity_check_dir<S: Scalar>(dir: &Path, deep: bool) -> IntegrityReport {
    let mut report = IntegrityReport::new();
    let collection = match Collection::<S>::load_from_dir(dir) {
        Ok(c) => {
            report.ok("load");
            c
        }
        Err(e) => {
            report.push("load", false, e.to_string());
            return report;
        }
    };

    for name in [RECORDS_FILE, MOSS_FILE, HNSW_FILE, EMBEDDINGS_FILE] {
        let check = format!("checksum_{name}");
        match std::fs::read(dir.join(name)) {
            Ok(bytes) => {
                let got = hex_string(&Sha256::digest(&bytes));
                match collection.manifest().checksums.get(name) {
                    Some(want) if *want == got => report.ok(&check),
                    Some(want) => report.push(
                        &check,
                        false,
                        format!("manifest says {want}, file hashes to {got}"),
                    ),
                    None => report.push(&check, false, "no checksum recorded in manifest"),
                }
            }
            Err(e) => report.push(&check, false, e.to_string()),
        }
    }

    let inner = collection.integrity_check(deep);
    report.passed &= inner.passed;
    report.checks.extend(inner.checks);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalbench::synth::{self, SynthConfig};
    use crate::hst::{IngestConfig, MANIFEST_FILE};

    fn collection() -> Collection<f32> {
        let recs = synth::generate(&SynthConfig::latency(15, 3));
        Collection::ingest(recs, IngestConfig::fingerprint_hash(64, 9)).unwrap()
    }

    #[test]
    fn fresh_collection_passes_all_checks() {
        let c = collection();
        let report = c.integrity_check(true);
        assert!(report.passed, "{:#?}", report.checks);
        assert!(report.checks.iter().any(|c| c.name == "rebuild_graph"));
    }

    #[test]
    fn dir_audit_passes_after_save() {
        let c = collection();
        let dir = tempfile::tempdir().unwrap();
        c.save_to_dir(dir.path()).unwrap();
        let report = integrity_check_dir::<f32>(dir.path(), true);
        assert!(report.passed, "{:#?}", report.checks);
    }

    #[test]
    fn deleted_record_line_reported_as_mismatch() {
        let c = collection();
        let dir = tempfile::tempdir().unwrap();
        c.save_to_dir(dir.path()).unwrap();
        let path = dir.path().join(RECORDS_FILE);
        let contents = std::fs::read_to_string(&path).unwrap();
        let trimmed: Vec<&str> = contents.lines().skip(1).collect();
        std::fs::write(&path, trimmed.join("\n")).unwrap();

        let report = integrity_check_dir::<f32>(dir.path(), false);
        assert!(!report.passed);
        let failing: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        assert!(failing.contains(&"moss_id_cover"), "{failing:?}");
        assert!(failing.contains(&&*format!("checksum_{RECORDS_FILE}")), "{failing:?}");
    }

    #[test]
    fn altered_manifest_seed_flagged() {
        let c = collection();
        let dir = tempfile::tempdir().unwrap();
        c.save_to_dir(dir.path()).unwrap();
        let path = dir.path().join(MANIFEST_FILE);
        let mut manifest: super::super::Manifest =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        manifest.hnsw.seed ^= 0xDEAD_BEEF;
        std::fs::write(&path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
        let report = integrity_check_dir::<f32>(dir.path(), true);
        assert!(!report.passed);
    }

    #[test]
    fn tampered_seed_in_memory_diverges_on_rebuild() {
        let mut c = collection();
        c.manifest.hnsw.seed ^= 1;
        let report = c.integrity_check(true);
        assert!(!report.passed);
        assert!(report
            .checks
            .iter()
            .any(|chk| chk.name == "rebuild_graph" && !chk.passed));
    }
}
