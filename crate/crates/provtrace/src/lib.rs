//! Code provenance search: winnowing fingerprints plus vector retrieval.
//!
//! A fragment of code is traced back to a ranked list of candidate source
//! snippets with authorship metadata. Two retrieval engines back the
//! pipeline:
//!
//! - [`mossidx`]: an inverted index over winnowing fingerprints with
//!   frequency filtering, rarest-first budgeted lookup, and exact-Jaccard
//!   re-ranking (the classic linear-time baseline);
//! - [`hnsw`]: a from-scratch hierarchical navigable small world graph over
//!   snippet embeddings, giving logarithmic-time candidate retrieval.
//!
//! [`hst`] composes them: the vector stage narrows the corpus to a
//! fixed-size candidate set, the fingerprint stage re-ranks it, so accuracy
//! follows the fingerprints while query cost scaling follows the graph.
//! [`clonegen`] fabricates evaluation queries (verbatim and
//! identifier-renamed windows) and [`evalbench`] measures Recall@N / MRR
//! grids and latency scaling.
//!
//! Vector-space types are generic over the scalar via [`scalar::Scalar`];
//! the crate-root aliases fix the default `f32` storage precision.

pub mod binio;
pub mod canon;
pub mod clonegen;
pub mod embed;
pub mod evalbench;
pub mod hnsw;
pub mod hst;
pub mod mossidx;
pub mod scalar;
pub mod winnow;

pub use canon::SourceText;
pub use scalar::Scalar;

/// Default-precision embedding.
pub type Embedding = embed::Embedding<f32>;
/// Default-precision proximity graph.
pub type HnswGraph = hnsw::HnswGraph<f32>;
/// Default-precision collection.
pub type Collection = hst::Collection<f32>;
