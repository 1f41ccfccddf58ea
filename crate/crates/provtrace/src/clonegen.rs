//! Evaluation query generation.
//!
//! Type-1 clones are verbatim token windows cut from corpus snippets; Type-2
//! clones additionally run the frequent-word replacement mutation: every
//! unique word gets one uniform draw, and a word that passes the draw while
//! being longer than 3 characters and occurring more than twice has all of
//! its whole-word occurrences replaced by a single fresh random 8-letter
//! string. Every query stays tied to its ground-truth source document.

use std::collections::HashMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::canon::{extract_window, tokenize, SourceText, TokenKind};
use crate::embed::splitmix64;
use crate::hst::CorpusRecord;

/// Knobs of the word-replacement mutation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationConfig {
    /// Per-word replacement probability.
    pub replace_prob: f64,
    /// Words must be strictly longer than this many characters.
    pub min_word_len_exclusive: usize,
    /// Words must occur strictly more often than this.
    pub min_count_exclusive: usize,
    /// Length of the replacement strings.
    pub random_string_len: usize,
    pub seed: u64,
}

impl MutationConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            replace_prob: 0.2,
            min_word_len_exclusive: 3,
            min_count_exclusive: 2,
            random_string_len: 8,
            seed,
        }
    }
}

/// One generated evaluation query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CloneQuery {
    pub id: String,
    pub source_doc_id: String,
    pub window_tokens: usize,
    /// 1 = verbatim window, 2 = mutated window.
    pub clone_type: u8,
    /// Per-query derived seed (drives offset, type draw, and mutation).
    pub seed: u64,
    pub fragment: String,
}

impl CloneQuery {
    pub fn fragment_source(&self) -> SourceText {
        SourceText::new(self.fragment.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryGenOutput {
    pub queries: Vec<CloneQuery>,
    /// Window sizes no corpus snippet was long enough for.
    pub skipped_sizes: Vec<usize>,
}

pub const DEFAULT_WINDOW_GRID: [usize; 7] = [7, 15, 30, 60, 120, 240, 480];

fn random_word(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| (b'a' + rng.gen_range(0..26)) as char).collect()
}

/// Replace frequent words with fresh random strings.
///
/// The word census is taken once over the unmodified fragment; unique words
/// are visited in first-appearance order, the uniform draw happens for every
/// word before the eligibility test, and a replaced word is substituted at
/// all of its whole-word occurrences.
pub fn replace_frequent_words(fragment: &SourceText, cfg: &MutationConfig) -> SourceText {
    let ts = tokenize(fragment);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    let mut order: Vec<&str> = Vec::new();
    for i in 0..ts.len() {
        if ts.tokens()[i].kind != TokenKind::Word {
            continue;
        }
        let w = ts.token_text(i);
        let c = counts.entry(w).or_insert(0);
        if *c == 0 {
            order.push(w);
        }
        *c += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut replacements: HashMap<&str, String> = HashMap::new();
    for word in order {
        let u: f64 = rng.gen();
        if u <= cfg.replace_prob
            && word.chars().count() > cfg.min_word_len_exclusive
            && counts[word] > cfg.min_count_exclusive
        {
            replacements.insert(word, random_word(&mut rng, cfg.random_string_len));
        }
    }
    if replacements.is_empty() {
        return fragment.clone();
    }

    let text = ts.text();
    let mut out = String::with_capacity(text.len());
    let mut cursor = 0usize;
    for (i, tok) in ts.tokens().iter().enumerate() {
        out.push_str(&text[cursor..tok.start]);
        let slice = ts.token_text(i);
        match replacements.get(slice) {
            Some(repl) if tok.kind == TokenKind::Word => out.push_str(repl),
            _ => out.push_str(slice),
        }
        cursor = tok.end();
    }
    out.push_str(&text[cursor..]);
    SourceText::new(out)
}

/// Derived seed for the j-th query of a batch.
fn query_seed(seed: u64, j: usize) -> u64 {
    splitmix64(seed ^ splitmix64(j as u64 ^ 0x51F0_23C9_8BA1_77DD))
}

/// Sample `per_size` token windows per grid size, mutating a
/// `type2_fraction` share of them. Snippets shorter than a window size are
/// skipped for that size; a size with no eligible snippet at all is reported
/// in `skipped_sizes`.
pub fn make_queries(
    records: &[CorpusRecord],
    grid: &[usize],
    per_size: usize,
    type2_fraction: f64,
    seed: u64,
) -> QueryGenOutput {
    let token_counts: Vec<usize> = records
        .iter()
        .map(|r| tokenize(&SourceText::new(r.content.as_str())).len())
        .collect();

    let mut queries = Vec::new();
    let mut skipped_sizes = Vec::new();
    for &size in grid {
        let eligible: Vec<usize> = (0..records.len())
            .filter(|&i| token_counts[i] >= size)
            .collect();
        if eligible.is_empty() {
            skipped_sizes.push(size);
            continue;
        }
        for j in 0..per_size {
            let qseed = query_seed(seed, j);
            let mut rng = ChaCha8Rng::seed_from_u64(qseed);
            let rec_idx = eligible[rng.gen_range(0..eligible.len())];
            let rec = &records[rec_idx];
            let ts = tokenize(&SourceText::new(rec.content.as_str()));
            let start = rng.gen_range(0..=ts.len() - size);
            let window = extract_window(&ts, start, size).expect("eligible window");
            let is_type2 = rng.gen::<f64>() < type2_fraction;
            let mutation_seed = rng.next_u64();
            let fragment = if is_type2 {
                replace_frequent_words(&window, &MutationConfig::with_seed(mutation_seed))
            } else {
                window
            };
            queries.push(CloneQuery {
                id: format!("q-w{size}-{j:05}"),
                source_doc_id: rec.id.clone(),
                window_tokens: size,
                clone_type: if is_type2 { 2 } else { 1 },
                seed: qseed,
                fragment: fragment.content,
            });
        }
    }
    QueryGenOutput {
        queries,
        skipped_sizes,
    }
}

/// Serialize queries as JSON lines.
pub fn queries_to_jsonl(queries: &[CloneQuery]) -> String {
    let mut out = String::new();
    for q in queries {
        out.push_str(&serde_json::to_string(q).expect("serializable query"));
        out.push('\n');
    }
    out
}

/// Parse a JSON-lines query set.
pub fn queries_from_jsonl(data: &str) -> Result<Vec<CloneQuery>, serde_json::Error> {
    data.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}
