//! Snippet embeddings.
//!
//! The built-in embedder feature-hashes winnowing fingerprints into a
//! fixed-dimension signed vector and L2-normalizes it, so cosine similarity
//! tracks fingerprint overlap and inherits whitespace/comment invariance.
//! Externally computed vectors (a learned encoder's output) can be imported
//! from a simple text format and used in place of the built-in embedder.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canon::SourceText;
use crate::scalar::Scalar;
use crate::winnow::{fingerprint, FingerprintSet, WinnowConfig};

/// Fixed-dimension unit vector. The zero vector (an unembeddable input with
/// no fingerprints) is stored as all-zeros and flagged, never normalized.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<S: Scalar> {
    values: Vec<S>,
    zero: bool,
}

impl<S: Scalar> Embedding<S> {
    /// Normalize a raw accumulator vector. An all-zero input becomes a
    /// zero-flagged embedding.
    pub fn from_raw(raw: Vec<f64>) -> Self {
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Self::zero(raw.len());
        }
        Self {
            values: raw
                .into_iter()
                .map(|v| S::from_f64(v / norm).expect("finite component"))
                .collect(),
            zero: false,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            values: vec![S::zero(); dim],
            zero: true,
        }
    }

    /// Wrap values that are already unit-norm without renormalizing (bit
    /// fidelity matters when reconstructing from a persisted graph).
    pub(crate) fn from_unit_values(values: Vec<S>) -> Self {
        Self {
            values,
            zero: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// L2 norm, accumulated in f64.
    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|v| {
                let f = v.to_f64().unwrap_or(0.0);
                f * f
            })
            .sum::<f64>()
            .sqrt()
    }
}

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: {expected} vs {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("embedder spec is '{0}'; computing embeddings requires the fingerprint-hash kind")]
    NotComputable(String),
    #[error("invalid embedder spec: {0}")]
    BadSpec(String),
    #[error("vector file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("vector file line {line}: duplicate doc id {id}")]
    DuplicateId { line: usize, id: String },
    #[error("vector file line {line}: doc {id} has dimension {got}, expected {expected}")]
    RecordDimension {
        line: usize,
        id: String,
        expected: usize,
        got: usize,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// How embeddings for a collection are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EmbedderKind {
    /// Deterministic signed feature hashing of winnowing fingerprints.
    FingerprintHash { seed: u64, wcfg: WinnowConfig },
    /// Vectors supplied from an external source (see `import_embeddings`).
    External { source: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub kind: EmbedderKind,
}

impl EmbedderSpec {
    pub fn fingerprint_hash(dim: usize, seed: u64, wcfg: WinnowConfig) -> Self {
        Self {
            dim,
            kind: EmbedderKind::FingerprintHash { seed, wcfg },
        }
    }

    pub fn external(dim: usize, source: impl Into<String>) -> Self {
        Self {
            dim,
            kind: EmbedderKind::External {
                source: source.into(),
            },
        }
    }

    pub fn validate(&self) -> Result<(), EmbedError> {
        if self.dim < 2 {
            return Err(EmbedError::BadSpec(format!(
                "dim must be >= 2, got {}",
                self.dim
            )));
        }
        if let EmbedderKind::FingerprintHash { wcfg, .. } = &self.kind {
            wcfg.validate()
                .map_err(|e| EmbedError::BadSpec(e.to_string()))?;
        }
        Ok(())
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            EmbedderKind::FingerprintHash { .. } => "fingerprint-hash",
            EmbedderKind::External { .. } => "external",
        }
    }
}

pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Bucket hash: first of the two independent seeded evaluations.
pub(crate) fn bucket_of(seed: u64, dim: usize, hash: u16) -> usize {
    let h1 = splitmix64(seed ^ 0xA076_1D64_78BD_642F ^ ((hash as u64) << 1));
    (h1 % dim as u64) as usize
}

/// Sign hash: second independent evaluation, mapped to +1/-1.
pub(crate) fn sign_of(seed: u64, hash: u16) -> f64 {
    let h2 = splitmix64(seed ^ 0x2545_F491_4F6C_DD1D ^ ((hash as u64) << 17));
    if h2 & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Embed precomputed fingerprints under a fingerprint-hash spec.
pub fn embed_fingerprints<S: Scalar>(
    fps: &FingerprintSet,
    spec: &EmbedderSpec,
) -> Result<Embedding<S>, EmbedError> {
    spec.validate()?;
    let EmbedderKind::FingerprintHash { seed, .. } = spec.kind else {
        return Err(EmbedError::NotComputable(spec.kind_name().to_string()));
    };
    if fps.is_empty() {
        return Ok(Embedding::zero(spec.dim));
    }
    let mut raw = vec![0.0f64; spec.dim];
    for &h in fps.hashes() {
        raw[bucket_of(seed, spec.dim, h)] += sign_of(seed, h);
    }
    Ok(Embedding::from_raw(raw))
}

/// Fingerprint the source and embed it. Deterministic for a fixed
/// `(src, spec)` pair.
pub fn embed<S: Scalar>(src: &SourceText, spec: &EmbedderSpec) -> Result<Embedding<S>, EmbedError> {
    let EmbedderKind::FingerprintHash { wcfg, .. } = &spec.kind else {
        return Err(EmbedError::NotComputable(spec.kind_name().to_string()));
    };
    let fps = fingerprint(src, wcfg);
    embed_fingerprints(&fps, spec)
}

/// Dot product without dimension checks; callers validate dimensions once.
/// Four accumulators so the loop vectorizes.
pub(crate) fn dot_unchecked<S: Scalar>(a: &[S], b: &[S]) -> S {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (S::zero(), S::zero(), S::zero(), S::zero());
    let mut i = 0;
    while i + 4 <= n {
        s0 = s0 + a[i] * b[i];
        s1 = s1 + a[i + 1] * b[i + 1];
        s2 = s2 + a[i + 2] * b[i + 2];
        s3 = s3 + a[i + 3] * b[i + 3];
        i += 4;
    }
    let mut acc = (s0 + s1) + (s2 + s3);
    while i < n {
        acc = acc + a[i] * b[i];
        i += 1;
    }
    acc
}

/// Cosine similarity of two unit embeddings (their dot product).
/// Zero-flagged embeddings have similarity 0 with everything.
pub fn cosine<S: Scalar>(a: &Embedding<S>, b: &Embedding<S>) -> Result<S, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if a.is_zero() || b.is_zero() {
        return Ok(S::zero());
    }
    Ok(dot_unchecked(a.values(), b.values()))
}

/// Load externally computed vectors: one record per line,
/// `<doc_id>\t<comma-separated decimal floats>`, constant dimension.
/// Vectors are renormalized to unit norm; ids must be unique.
pub fn import_embeddings<S: Scalar>(
    reader: impl BufRead,
    expected_dim: Option<usize>,
) -> Result<BTreeMap<String, Embedding<S>>, EmbedError> {
    let mut out = BTreeMap::new();
    let mut dim = expected_dim;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').ok_or_else(|| EmbedError::Malformed {
            line: line_no,
            reason: "missing tab separator".into(),
        })?;
        if id.is_empty() {
            return Err(EmbedError::Malformed {
                line: line_no,
                reason: "empty doc id".into(),
            });
        }
        let values: Vec<f64> = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| EmbedError::Malformed {
                line: line_no,
                reason: format!("bad float: {e}"),
            })?;
        let d = *dim.get_or_insert(values.len());
        if values.len() != d {
            return Err(EmbedError::RecordDimension {
                line: line_no,
                id: id.to_string(),
                expected: d,
                got: values.len(),
            });
        }
        if out.contains_key(id) {
            return Err(EmbedError::DuplicateId {
                line: line_no,
                id: id.to_string(),
            });
        }
        out.insert(id.to_string(), Embedding::from_raw(values));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::winnow::Mark;

    fn spec(dim: usize, seed: u64) -> EmbedderSpec {
        EmbedderSpec::fingerprint_hash(dim, seed, WinnowConfig::default())
    }

    fn fps_of(hashes: &[u16]) -> FingerprintSet {
        FingerprintSet::from_marks(
            hashes
                .iter()
                .enumerate()
                .map(|(i, &h)| Mark {
                    hash: h,
                    pos: i as u32,
                })
                .collect(),
        )
    }

    #[test]
    fn identical_text_identical_embedding() {
        let s = spec(64, 7);
        let text = SourceText::new("fn probe(q: &[f32]) -> f32 { q.iter().sum() }");
        let a: Embedding<f64> = embed(&text, &s).unwrap();
        let b: Embedding<f64> = embed(&text, &s).unwrap();
        assert_eq!(a, b);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unit_norm_within_tolerance() {
        let s = spec(1024, 99);
        for text in ["let x = 1;", "while (n--) acc += n * n;", "SELECT a FROM b"] {
            let e: Embedding<f32> = embed(&SourceText::new(text), &s).unwrap();
            assert!(!e.is_zero());
            assert!((e.norm() - 1.0).abs() < 1e-6, "norm {}", e.norm());
        }
    }

    #[test]
    fn disjoint_buckets_are_orthogonal() {
        // Two fingerprint sets with verified-disjoint buckets must embed to
        // exactly orthogonal vectors.
        let s = spec(256, 3);
        let fa = fps_of(&[10, 20, 30]);
        let fb = fps_of(&[40, 50, 60]);
        let buckets = |f: &FingerprintSet| -> Vec<usize> {
            f.hashes()
                .iter()
                .map(|&h| bucket_of(3, 256, h))
                .collect()
        };
        let ba = buckets(&fa);
        let bb = buckets(&fb);
        assert!(ba.iter().all(|x| !bb.contains(x)), "bucket collision in fixture");
        let ea: Embedding<f64> = embed_fingerprints(&fa, &s).unwrap();
        let eb: Embedding<f64> = embed_fingerprints(&fb, &s).unwrap();
        assert_eq!(cosine(&ea, &eb).unwrap(), 0.0);
    }

    #[test]
    fn empty_fingerprints_yield_zero_flagged() {
        let s = spec(16, 1);
        let e: Embedding<f32> = embed(&SourceText::new(""), &s).unwrap();
        assert!(e.is_zero());
        assert!(e.values().iter().all(|v| *v == 0.0));
        let other: Embedding<f32> = embed(&SourceText::new("abcdefgh"), &s).unwrap();
        assert_eq!(cosine(&e, &other).unwrap(), 0.0);
        assert_eq!(cosine(&e, &e).unwrap(), 0.0);
    }

    #[test]
    fn negation_gives_minus_one() {
        let e = Embedding::<f64>::from_raw(vec![0.5, -1.5, 2.0, 0.0]);
        let neg = Embedding::<f64>::from_raw(vec![-0.5, 1.5, -2.0, 0.0]);
        assert!((cosine(&e, &neg).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_built_dot_product() {
        let a = Embedding::<f64>::from_raw(vec![1.0, 0.0, 1.0, 0.0]);
        let b = Embedding::<f64>::from_raw(vec![1.0, 1.0, 0.0, 0.0]);
        // (1/sqrt2, 0, 1/sqrt2, 0) . (1/sqrt2, 1/sqrt2, 0, 0) = 0.5
        assert!((cosine(&a, &b).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = Embedding::<f64>::from_raw(vec![1.0, 0.0]);
        let b = Embedding::<f64>::from_raw(vec![1.0, 0.0, 0.0]);
        assert!(matches!(
            cosine(&a, &b),
            Err(EmbedError::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn seed_changes_vector_not_identity() {
        let text = SourceText::new("for (i = 0; i < n; i++) total += w[i] * x[i];");
        let a: Embedding<f64> = embed(&text, &spec(128, 1)).unwrap();
        let b: Embedding<f64> = embed(&text, &spec(128, 2)).unwrap();
        assert_ne!(a, b);
        assert!((cosine(&b, &b).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn external_spec_cannot_compute() {
        let s = EmbedderSpec::external(8, "vectors.tsv");
        assert!(matches!(
            embed::<f64>(&SourceText::new("x"), &s),
            Err(EmbedError::NotComputable(_))
        ));
    }

    #[test]
    fn import_empty_file() {
        let m = import_embeddings::<f32>(&b""[..], None).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn import_single_record_normalized() {
        let data = "doc-a\t3.0,4.0,0.0,0.0\n";
        let m = import_embeddings::<f64>(data.as_bytes(), Some(4)).unwrap();
        let e = &m["doc-a"];
        assert_eq!(e.dim(), 4);
        assert!((e.norm() - 1.0).abs() < 1e-12);
        assert!((e.values()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn import_dimension_mismatch_names_record() {
        let data = "doc-a\t1.0,0.0\ndoc-b\t1.0,0.0,0.0\n";
        match import_embeddings::<f64>(data.as_bytes(), Some(2)) {
            Err(EmbedError::RecordDimension { id, expected, got, line }) => {
                assert_eq!(id, "doc-b");
                assert_eq!((expected, got, line), (2, 3, 2));
            }
            other => panic!("expected dimension error, got {other:?}"),
        }
    }

    #[test]
    fn import_duplicate_id_rejected() {
        let data = "a\t1.0,0.0\na\t0.0,1.0\n";
        assert!(matches!(
            import_embeddings::<f64>(data.as_bytes(), None),
            Err(EmbedError::DuplicateId { .. })
        ));
    }

    #[test]
    fn import_malformed_float_rejected() {
        let data = "a\t1.0,zap\n";
        assert!(matches!(
            import_embeddings::<f64>(data.as_bytes(), None),
            Err(EmbedError::Malformed { line: 1, .. })
        ));
    }
}
