//! Multilingual language-model data curation, tokenization and evaluation.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`corpus`]: document ingestion, de-duplication, compression-entropy,
//!   classifier and heuristic filtering, dataset statistics.
//! - [`tokenizer`]: five tokenization strategies over a byte-level BPE core.
//! - [`scoring`]: the next-token scoring interface with an interpolated n-gram
//!   model and a toy decoder-only transformer, plus top-p/top-k sampling.
//! - [`perplexity`]: character- and token-normalised perplexity, language and
//!   family aggregation, and the tokenization strategy comparison.
//! - [`eval`]: zero/few-shot classification, sequence labeling, knowledge
//!   probing and prompted generation.
//! - [`metrics`]: accuracy, tag precision, NER F1, EM, token F1, BLEU, ROUGE-L.
//! - [`report`]: SVG bar charts and the carbon estimate.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod metrics;
pub mod perplexity;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod tokenizer;

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
