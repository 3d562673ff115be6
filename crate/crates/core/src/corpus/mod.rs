//! Corpus ingestion and cleaning.

mod classifier;
mod dedup;
mod entropy;
mod hash;
mod heuristics;
mod pipeline;
mod stats;

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perplexity::LanguageRegistry;

pub use classifier::{ClassifierConfig, QualityClassifier, NUM_FEATURES};
pub use dedup::deduplicate;
pub use entropy::{compression_ratio, entropy_filter, nearest_rank_quantile};
pub use hash::{text_hash64, FNV_OFFSET_BASIS};
pub use heuristics::{heuristic_filter, HeuristicThresholds};
pub use pipeline::{run_pipeline, ClassifierStage, EntropyBand, PipelineConfig, PipelineOutput, StageOrder};
pub use stats::{compute_stats, CorpusStats, SourceCounts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wiki,
    Web,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Wiki => "wiki",
            Source::Web => "web",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub source: Source,
    pub text: String,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        lang: impl Into<String>,
        source: Source,
        text: impl Into<String>,
    ) -> Self {
        Self { id: id.into(), lang: lang.into(), source, text: text.into() }
    }

    /// Checks the ingestion invariants. `registry` is optional so that
    /// callers working with ad-hoc language codes can skip the lookup.
    pub fn validate(&self, registry: Option<&LanguageRegistry>) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidArgument("document id is empty".into()));
        }
        if self.text.is_empty() {
            return Err(Error::InvalidArgument(format!("document `{}` has empty text", self.id)));
        }
        if let Some(registry) = registry {
            if !registry.contains(&self.lang) {
                return Err(Error::UnknownLanguage(self.lang.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Keep,
    DropDuplicate,
    DropEntropy,
    DropClassifier,
    DropHeuristic,
}

impl Verdict {
    pub const ALL: [Verdict; 5] = [
        Verdict::Keep,
        Verdict::DropDuplicate,
        Verdict::DropEntropy,
        Verdict::DropClassifier,
        Verdict::DropHeuristic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Keep => "keep",
            Verdict::DropDuplicate => "drop_duplicate",
            Verdict::DropEntropy => "drop_entropy",
            Verdict::DropClassifier => "drop_classifier",
            Verdict::DropHeuristic => "drop_heuristic",
        }
    }
}

/// One verdict per input document. `score` holds the compression ratio for
/// entropy drops, the classifier probability for classifier drops, and 0
/// otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub doc_id: String,
    pub verdict: Verdict,
    pub score: f64,
}

impl FilterDecision {
    pub fn keep(doc_id: impl Into<String>) -> Self {
        Self { doc_id: doc_id.into(), verdict: Verdict::Keep, score: 0.0 }
    }

    pub fn drop(doc_id: impl Into<String>, verdict: Verdict, score: f64) -> Self {
        Self { doc_id: doc_id.into(), verdict, score }
    }
}

/// Reads one JSON document per line. Blank lines are skipped; every other
/// line must parse and pass [`Document::validate`].
pub fn read_jsonl<R: BufRead>(
    reader: R,
    registry: Option<&LanguageRegistry>,
) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("line {}", lineno + 1), e.to_string()))?;
        doc.validate(registry)
            .map_err(|e| Error::parse(format!("line {}", lineno + 1), e.to_string()))?;
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_jsonl<W: Write, T: Serialize>(mut writer: W, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut writer, item)?;
        writer.write_all(b"\n").map_err(|e| Error::io("<jsonl output>", e))?;
    }
    Ok(())
}
