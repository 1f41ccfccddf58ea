//! Winnowing fingerprints over canonicalized text.
//!
//! Pipeline: canonicalize, slice into overlapping character k-grams, hash
//! each k-gram to the low 16 bits of its SHA-1 digest, then keep the minimum
//! hash of every sliding window of `w` consecutive hashes. Two documents
//! sharing a canonical substring of at least `w + k - 1` characters are
//! guaranteed at least one common fingerprint.

use serde::{Deserialize, Serialize};
use sha1::{Digest, Sha1};
use thiserror::Error;

use crate::canon::{canonicalize, CanonicalText, SourceText};

/// k-gram length and window size. Defaults follow the standard MOSS setup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinnowConfig {
    /// k-gram length in characters.
    pub k: usize,
    /// Window size in hashes.
    pub w: usize,
}

impl Default for WinnowConfig {
    fn default() -> Self {
        Self { k: 5, w: 4 }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WinnowConfigError {
    #[error("k must be >= 1 (got {0})")]
    BadK(usize),
    #[error("w must be >= 1 (got {0})")]
    BadW(usize),
}

impl WinnowConfig {
    pub fn validate(&self) -> Result<(), WinnowConfigError> {
        if self.k < 1 {
            return Err(WinnowConfigError::BadK(self.k));
        }
        if self.w < 1 {
            return Err(WinnowConfigError::BadW(self.w));
        }
        Ok(())
    }

    /// Shortest shared canonical substring guaranteed to produce a common
    /// fingerprint.
    pub fn guarantee_length(&self) -> usize {
        self.w + self.k - 1
    }
}

/// A selected fingerprint: hash value plus the canonical character position
/// of the k-gram it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mark {
    pub hash: u16,
    pub pos: u32,
}

/// Winnowed fingerprints of one document.
///
/// `hashes` is the deduplicated, sorted hash set used for all similarity
/// math; `marks` keeps positions for match reporting.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FingerprintSet {
    hashes: Vec<u16>,
    marks: Vec<Mark>,
}

impl FingerprintSet {
    /// Rebuild a set from its marks (used when loading a persisted index).
    pub fn from_marks(marks: Vec<Mark>) -> Self {
        let mut hashes: Vec<u16> = marks.iter().map(|m| m.hash).collect();
        hashes.sort_unstable();
        hashes.dedup();
        Self { hashes, marks }
    }

    /// Sorted, deduplicated hash set.
    pub fn hashes(&self) -> &[u16] {
        &self.hashes
    }

    pub fn marks(&self) -> &[Mark] {
        &self.marks
    }

    pub fn is_empty(&self) -> bool {
        self.marks.is_empty()
    }

    /// Number of distinct hash values.
    pub fn distinct_hashes(&self) -> usize {
        self.hashes.len()
    }

    pub fn contains(&self, hash: u16) -> bool {
        self.hashes.binary_search(&hash).is_ok()
    }
}

/// Low 16 bits of the SHA-1 digest, big-endian over the final two bytes.
pub fn sha1_16(bytes: &[u8]) -> u16 {
    let d = Sha1::digest(bytes);
    ((d[18] as u16) << 8) | d[19] as u16
}

/// Hashes of all overlapping k-grams of the canonical text, in order.
/// Texts shorter than `k` characters yield an empty list.
pub fn kgram_hashes(text: &CanonicalText, k: usize) -> Vec<u16> {
    debug_assert!(k >= 1);
    let bytes = text.chars.as_bytes();
    if text.chars.is_ascii() {
        if bytes.len() < k {
            return Vec::new();
        }
        return bytes.windows(k).map(sha1_16).collect();
    }
    let starts: Vec<usize> = text.chars.char_indices().map(|(i, _)| i).collect();
    let n = starts.len();
    if n < k {
        return Vec::new();
    }
    (0..=n - k)
        .map(|i| {
            let lo = starts[i];
            let hi = if i + k < n { starts[i + k] } else { bytes.len() };
            sha1_16(&bytes[lo..hi])
        })
        .collect()
}

/// Rightmost position of the minimum value in `hashes[lo..hi]`.
fn rightmost_min(hashes: &[u16], lo: usize, hi: usize) -> usize {
    let mut best = hashes[lo];
    let mut best_pos = lo;
    for (off, &h) in hashes[lo + 1..hi].iter().enumerate() {
        if h <= best {
            best = h;
            best_pos = lo + 1 + off;
        }
    }
    best_pos
}

/// Select fingerprints: the minimum hash of each window of `w`, ties broken
/// by rightmost position. Fewer than `w` hashes select the global minimum so
/// tiny inputs still fingerprint.
pub fn winnow(hashes: &[u16], w: usize) -> FingerprintSet {
    debug_assert!(w >= 1);
    if hashes.is_empty() {
        return FingerprintSet::default();
    }
    let mut marks = Vec::new();
    if hashes.len() < w {
        let p = rightmost_min(hashes, 0, hashes.len());
        marks.push(Mark {
            hash: hashes[p],
            pos: p as u32,
        });
    } else {
        // Selected positions are non-decreasing, so one-step memory is
        // enough to record each (hash, position) pair exactly once.
        let mut last_pos = usize::MAX;
        for start in 0..=hashes.len() - w {
            let p = rightmost_min(hashes, start, start + w);
            if p != last_pos {
                marks.push(Mark {
                    hash: hashes[p],
                    pos: p as u32,
                });
                last_pos = p;
            }
        }
    }
    FingerprintSet::from_marks(marks)
}

/// Canonicalize, hash k-grams, and winnow in one step.
pub fn fingerprint(src: &SourceText, cfg: &WinnowConfig) -> FingerprintSet {
    winnow(&kgram_hashes(&canonicalize(src), cfg.k), cfg.w)
}

/// Jaccard similarity of the two hash sets; 0.0 when both are empty.
pub fn jaccard(a: &FingerprintSet, b: &FingerprintSet) -> f64 {
    jaccard_sorted(&a.hashes, &b.hashes)
}

/// Jaccard over sorted, deduplicated hash slices.
pub fn jaccard_sorted(a: &[u16], b: &[u16]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    let mut i = 0;
    let mut j = 0;
    let mut inter = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fps(hashes: &[u16]) -> FingerprintSet {
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
    fn kgram_short_text_is_empty() {
        let c = canonicalize(&SourceText::new("abcd"));
        assert!(kgram_hashes(&c, 5).is_empty());
    }

    #[test]
    fn kgram_repeats_hash_identically() {
        let c = canonicalize(&SourceText::new("aaaaaa"));
        let hs = kgram_hashes(&c, 5);
        assert_eq!(hs.len(), 2);
        assert_eq!(hs[0], hs[1]);
    }

    #[test]
    fn kgram_matches_independent_sha1() {
        // Low 16 bits of SHA-1("abcde") and SHA-1("bcdef"), big-endian,
        // computed with an external SHA-1 tool.
        let c = canonicalize(&SourceText::new("abcdef"));
        assert_eq!(kgram_hashes(&c, 5), vec![17204, 57514]);
    }

    #[test]
    fn winnow_empty() {
        assert!(winnow(&[], 4).is_empty());
    }

    #[test]
    fn winnow_shorter_than_window_selects_global_min() {
        let f = winnow(&[5], 4);
        assert_eq!(f.marks(), &[Mark { hash: 5, pos: 0 }]);
        let f = winnow(&[9, 3, 7], 4);
        assert_eq!(f.marks(), &[Mark { hash: 3, pos: 1 }]);
    }

    #[test]
    fn winnow_rightmost_min_per_window() {
        let f = winnow(&[77, 74, 42, 17, 98, 50, 17, 98], 4);
        let got: Vec<(u16, u32)> = f.marks().iter().map(|m| (m.hash, m.pos)).collect();
        assert_eq!(got, vec![(17, 3), (17, 6)]);
        assert_eq!(f.hashes(), &[17]);
    }

    #[test]
    fn fingerprint_small_text_frozen() {
        // k-gram hashes of "abcdefgh": [17204, 57514, 11985, 7639];
        // the single window of four selects 7639 at position 3.
        let f = fingerprint(&SourceText::new("abcdefgh"), &WinnowConfig::default());
        assert_eq!(f.marks(), &[Mark { hash: 7639, pos: 3 }]);
    }

    #[test]
    fn fingerprint_ignores_whitespace_and_comments() {
        let cfg = WinnowConfig::default();
        let a = fingerprint(&SourceText::new("fn add(a: i32) { a + 1 } // done"), &cfg);
        let b = fingerprint(
            &SourceText::new("fn add( a :\ti32 )\n{\n  a + 1 /* body */ }\n"),
            &cfg,
        );
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn fingerprint_empty_source() {
        assert!(fingerprint(&SourceText::new(""), &WinnowConfig::default()).is_empty());
    }

    #[test]
    fn fingerprint_subset_of_all_kgrams_on_code_sample() {
        // A ~1 kB sample; every selected hash must be one of the k-gram
        // hashes and every position must index the k-gram it claims.
        let sample = "fn main() {\n    let mut total = 0;\n    for i in 0..100 {\n        total += i * i;\n    }\n    println!(\"{}\", total);\n}\n"
            .repeat(8);
        let cfg = WinnowConfig::default();
        let canonical = canonicalize(&SourceText::new(&sample));
        let all = kgram_hashes(&canonical, cfg.k);
        let f = winnow(&all, cfg.w);
        for m in f.marks() {
            assert_eq!(all[m.pos as usize], m.hash);
        }
        assert!(f
            .marks()
            .iter()
            .all(|m| (m.pos as usize) <= canonical.char_count() - cfg.k));
    }

    #[test]
    fn jaccard_examples() {
        let a = fps(&[1, 2, 3]);
        assert_eq!(jaccard(&a, &a), 1.0);
        assert_eq!(jaccard(&a, &fps(&[4, 5])), 0.0);
        assert_eq!(jaccard(&a, &fps(&[2, 3, 4])), 0.5);
        assert_eq!(jaccard(&FingerprintSet::default(), &FingerprintSet::default()), 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(WinnowConfig::default().validate().is_ok());
        assert_eq!(
            WinnowConfig { k: 0, w: 4 }.validate(),
            Err(WinnowConfigError::BadK(0))
        );
        assert_eq!(
            WinnowConfig { k: 5, w: 0 }.validate(),
            Err(WinnowConfigError::BadW(0))
        );
    }

    proptest! {
        #[test]
        fn selected_hashes_subset_of_kgram_hashes(s in "[a-z0-9();={}+*]{0,120}") {
            let c = canonicalize(&SourceText::new(&s));
            let all = kgram_hashes(&c, 5);
            let f = winnow(&all, 4);
            for h in f.hashes() {
                prop_assert!(all.contains(h));
            }
        }

        #[test]
        fn coverage_no_gap_longer_than_window(hs in proptest::collection::vec(0u16..u16::MAX, 4..200)) {
            let f = winnow(&hs, 4);
            let marks = f.marks();
            prop_assert!(!marks.is_empty());
            prop_assert!(marks[0].pos <= 3);
            prop_assert!(marks[marks.len() - 1].pos as usize >= hs.len() - 4);
            for pair in marks.windows(2) {
                prop_assert!(pair[1].pos - pair[0].pos <= 4);
            }
        }

        #[test]
        fn guarantee_shared_substring_shares_fingerprint(
            prefix_a in "[a-z0-9;=+()]{0,40}",
            prefix_b in "[a-z0-9;=+()]{0,40}",
            shared in "[a-z0-9;=+()]{8,24}",
            suffix_a in "[a-z0-9;=+()]{0,40}",
            suffix_b in "[a-z0-9;=+()]{0,40}",
        ) {
            let cfg = WinnowConfig::default();
            let a = fingerprint(&SourceText::new(format!("{prefix_a}{shared}{suffix_a}")), &cfg);
            let b = fingerprint(&SourceText::new(format!("{prefix_b}{shared}{suffix_b}")), &cfg);
            let common = a.hashes().iter().any(|h| b.contains(*h));
            prop_assert!(common);
        }

        #[test]
        fn winnow_deterministic(hs in proptest::collection::vec(any::<u16>(), 0..100)) {
            prop_assert_eq!(winnow(&hs, 4), winnow(&hs, 4));
        }
    }
}
