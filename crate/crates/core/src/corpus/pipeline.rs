//! Composition of the cleaning stages into one deterministic pass.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::entropy::band_decisions;
use super::{
    compression_ratio, compute_stats, deduplicate, heuristic_filter, ClassifierConfig,
    CorpusStats, Document, FilterDecision, HeuristicThresholds, QualityClassifier, Source,
    Verdict,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrder {
    #[default]
    DedupFirst,
    DedupLast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EntropyBand {
    pub low_quantile: f64,
    pub high_quantile: f64,
}

impl Default for EntropyBand {
    fn default() -> Self {
        Self { low_quantile: 0.02, high_quantile: 0.98 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierStage {
    /// Documents scoring below this probability are dropped.
    pub threshold: f64,
    pub training: ClassifierConfig,
}

impl Default for ClassifierStage {
    fn default() -> Self {
        Self { threshold: 0.5, training: ClassifierConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub order: StageOrder,
    pub entropy: Option<EntropyBand>,
    /// When set without a pre-trained model, the classifier is trained on the
    /// surviving wiki documents (positive) against surviving web documents.
    pub classifier: Option<ClassifierStage>,
    pub heuristics: Option<HeuristicThresholds>,
    /// Sources the entropy, classifier and heuristic stages apply to.
    pub filter_sources: Vec<Source>,
    /// Worker threads for per-document stages; 0 lets rayon decide.
    pub workers: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            order: StageOrder::DedupFirst,
            entropy: Some(EntropyBand::default()),
            classifier: None,
            heuristics: Some(HeuristicThresholds::default()),
            filter_sources: vec![Source::Web],
            workers: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub kept: Vec<Document>,
    /// One decision per input document, in input order.
    pub decisions: Vec<FilterDecision>,
    pub stats: CorpusStats,
}

impl PipelineOutput {
    pub fn count(&self, verdict: Verdict) -> usize {
        self.decisions.iter().filter(|d| d.verdict == verdict).count()
    }
}

struct Run<'a> {
    docs: &'a [Document],
    config: &'a PipelineConfig,
    decisions: Vec<Option<FilterDecision>>,
    alive: Vec<usize>,
}

impl Run<'_> {
    fn filterable(&self) -> Vec<usize> {
        self.alive
            .iter()
            .copied()
            .filter(|&i| self.config.filter_sources.contains(&self.docs[i].source))
            .collect()
    }

    fn apply(&mut self, verdicts: Vec<(usize, FilterDecision)>) {
        for (i, d) in verdicts {
            if d.verdict != Verdict::Keep {
                self.decisions[i] = Some(d);
            }
        }
        let decisions = &self.decisions;
        self.alive.retain(|&i| decisions[i].is_none());
    }

    fn dedup(&mut self) {
        let subset: Vec<Document> = self.alive.iter().map(|&i| self.docs[i].clone()).collect();
        let (_, decisions) = deduplicate(&subset);
        let verdicts = self.alive.iter().copied().zip(decisions).collect();
        self.apply(verdicts);
    }

    fn entropy(&mut self, band: &EntropyBand) -> Result<()> {
        let idx = self.filterable();
        if idx.is_empty() {
            return Ok(());
        }
        let ratios = idx
            .par_iter()
            .map(|&i| compression_ratio(&self.docs[i].text))
            .collect::<Result<Vec<_>>>()?;
        let subset: Vec<Document> = idx.iter().map(|&i| self.docs[i].clone()).collect();
        let decisions = band_decisions(&subset, &ratios, band.low_quantile, band.high_quantile);
        self.apply(idx.into_iter().zip(decisions).collect());
        Ok(())
    }

    fn classifier(&mut self, stage: &ClassifierStage, model: Option<&QualityClassifier>) -> Result<()> {
        let idx = self.filterable();
        if idx.is_empty() {
            return Ok(());
        }
        let trained;
        let model = match model {
            Some(m) => m,
            None => {
                let (pos, neg): (Vec<Document>, Vec<Document>) = self
                    .alive
                    .iter()
                    .map(|&i| self.docs[i].clone())
                    .partition(|d| d.source == Source::Wiki);
                trained = QualityClassifier::train(&pos, &neg, &stage.training)?;
                &trained
            }
        };
        let verdicts = idx
            .par_iter()
            .map(|&i| {
                let doc = &self.docs[i];
                let p = model.probability(&doc.text);
                let d = if p < stage.threshold {
                    FilterDecision::drop(&doc.id, Verdict::DropClassifier, p)
                } else {
                    FilterDecision::keep(&doc.id)
                };
                (i, d)
            })
            .collect();
        self.apply(verdicts);
        Ok(())
    }

    fn heuristics(&mut self, thresholds: &HeuristicThresholds) {
        let verdicts = self
            .filterable()
            .par_iter()
            .map(|&i| (i, heuristic_filter(&self.docs[i], thresholds)))
            .collect();
        self.apply(verdicts);
    }

    fn filters(&mut self, model: Option<&QualityClassifier>) -> Result<()> {
        let config = self.config;
        if let Some(band) = &config.entropy {
            self.entropy(band)?;
        }
        if let Some(stage) = &config.classifier {
            self.classifier(stage, model)?;
        }
        if let Some(t) = &config.heuristics {
            self.heuristics(t);
        }
        Ok(())
    }
}

/// Runs de-duplication and the configured filters. Output order and content
/// do not depend on `config.workers`.
pub fn run_pipeline(
    docs: &[Document],
    config: &PipelineConfig,
    classifier: Option<&QualityClassifier>,
) -> Result<PipelineOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    pool.install(|| {
        let mut run = Run {
            docs,
            config,
            decisions: vec![None; docs.len()],
            alive: (0..docs.len()).collect(),
        };
        match config.order {
            StageOrder::DedupFirst => {
                run.dedup();
                run.filters(classifier)?;
            }
            StageOrder::DedupLast => {
                run.filters(classifier)?;
                run.dedup();
            }
        }
        let kept: Vec<Document> = run.alive.iter().map(|&i| docs[i].clone()).collect();
        let decisions = run
            .decisions
            .into_iter()
            .zip(docs)
            .map(|(d, doc)| d.unwrap_or_else(|| FilterDecision::keep(&doc.id)))
            .collect();
        let stats = compute_stats(&kept);
        Ok(PipelineOutput { kept, decisions, stats })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Document> {
        let mut docs = Vec::new();
        for i in 0..60 {
            let text = format!(
                "Document number {i} talks about rivers, mountains and the people living \
                 near them; it has enough prose to pass every heuristic threshold that is \
                 configured by default in this pipeline, and then some more words {i}."
            );
            docs.push(Document::new(format!("w{i}"), "en", Source::Web, text));
        }
        docs.push(Document::new("dup", "en", Source::Web, docs[3].text.clone()));
        docs.push(Document::new("short", "en", Source::Web, "too short"));
        docs.push(Document::new("wiki", "en", Source::Wiki, "short wiki text survives"));
        docs
    }

    #[test]
    fn decisions_partition_the_input() {
        let docs = corpus();
        let out = run_pipeline(&docs, &PipelineConfig::default(), None).unwrap();
        assert_eq!(out.decisions.len(), docs.len());
        let total: usize = Verdict::ALL.iter().map(|v| out.count(*v)).sum();
        assert_eq!(total, docs.len());
        assert_eq!(out.kept.len(), out.count(Verdict::Keep));
        assert_eq!(out.count(Verdict::DropDuplicate), 1);
        // Tiny texts compress badly, so the entropy band catches this one
        // before the length heuristic runs.
        assert_eq!(out.decisions[61].verdict, Verdict::DropEntropy);
        assert_eq!(out.decisions[62].verdict, Verdict::Keep);
        for (d, doc) in out.decisions.iter().zip(&docs) {
            assert_eq!(d.doc_id, doc.id);
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let docs = corpus();
        let one = run_pipeline(&docs, &PipelineConfig { workers: 1, ..Default::default() }, None).unwrap();
        let four = run_pipeline(&docs, &PipelineConfig { workers: 4, ..Default::default() }, None).unwrap();
        assert_eq!(one.decisions, four.decisions);
        assert_eq!(one.kept, four.kept);
    }

    #[test]
    fn dedup_last_still_partitions() {
        let docs = corpus();
        let cfg = PipelineConfig { order: StageOrder::DedupLast, ..Default::default() };
        let out = run_pipeline(&docs, &cfg, None).unwrap();
        let total: usize = Verdict::ALL.iter().map(|v| out.count(*v)).sum();
        assert_eq!(total, docs.len());
    }

    #[test]
    fn classifier_stage_drops_low_probability_web_docs() {
        let mut docs = Vec::new();
        for i in 0..40 {
            docs.push(Document::new(format!("k{i}"), "en", Source::Wiki, format!("the history of the river valley and its towns {i}")));
            docs.push(Document::new(format!("b{i}"), "en", Source::Web, format!("CLICK HERE buy now free shipping {i} subscribe")));
        }
        let cfg = PipelineConfig {
            entropy: None,
            heuristics: None,
            classifier: Some(ClassifierStage::default()),
            ..Default::default()
        };
        let out = run_pipeline(&docs, &cfg, None).unwrap();
        assert_eq!(out.count(Verdict::DropClassifier), 40);
        assert!(out.kept.iter().all(|d| d.source == Source::Wiki));
        assert!(out
            .decisions
            .iter()
            .filter(|d| d.verdict == Verdict::DropClassifier)
            .all(|d| d.score < 0.5));
    }
}
