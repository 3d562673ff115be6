//! Tokenization strategy comparison at desk scale.
//!
//! For every strategy: train a tokenizer and an n-gram scorer on the training
//! split, score held-out documents with character-normalised perplexity,
//! average per language and then across languages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{aggregate, char_perplexity, DocScore, LanguageRegistry, Normalization};
use crate::corpus::{text_hash64, Document};
use crate::error::{Error, Result};
use crate::scoring::NGramModel;
use crate::tokenizer::{train_bbpe, Strategy, DEFAULT_VOCAB_SIZE};

/// Published full-scale perplexity for each strategy, shown for reference only.
pub fn reference_perplexity(strategy: Strategy) -> f64 {
    match strategy {
        Strategy::Default => 6.94,
        Strategy::Case => 8.13,
        Strategy::Arithmetic => 7.99,
        Strategy::Combined => 8.43,
        Strategy::Char => 9.47,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub vocab_size: usize,
    pub ngram_order: usize,
    pub add_k: f64,
    pub weights: Vec<f64>,
    /// A document is held out when `text_hash64(id) % heldout_modulus == 0`.
    pub heldout_modulus: u64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            vocab_size: DEFAULT_VOCAB_SIZE,
            ngram_order: 3,
            add_k: 0.01,
            weights: vec![0.1, 0.3, 0.6],
            heldout_modulus: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub strategy: Strategy,
    pub char_perplexity: f64,
    pub reference: f64,
    pub vocab_size: usize,
    pub merges: usize,
    pub heldout_tokens: usize,
    pub per_language: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub config: CompareConfig,
    pub languages: Vec<String>,
    pub train_docs: usize,
    pub heldout_docs: usize,
    pub rows: Vec<StrategyRow>,
}

impl StrategyComparison {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Plain-text table with the reference column alongside.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<12} {:>14} {:>10}", "strategy", "char ppl", "reference");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{:<12} {:>14.4} {:>10.2}",
                row.strategy.as_str(),
                row.char_perplexity,
                row.reference
            );
        }
        out
    }
}

/// Deterministic per-language split. A language whose documents all land in
/// training gives up its last document to the held-out set.
pub fn heldout_split(docs: &[Document], modulus: u64) -> Result<(Vec<&Document>, Vec<&Document>)> {
    if modulus < 2 {
        return Err(Error::InvalidArgument("heldout_modulus must be at least 2".into()));
    }
    let mut held = vec![false; docs.len()];
    let mut last_of_lang: BTreeMap<&str, usize> = BTreeMap::new();
    let mut has_heldout: BTreeSet<&str> = BTreeSet::new();
    for (i, d) in docs.iter().enumerate() {
        last_of_lang.insert(&d.lang, i);
        if text_hash64(&d.id).is_multiple_of(modulus) {
            held[i] = true;
            has_heldout.insert(&d.lang);
        }
    }
    for (lang, &i) in &last_of_lang {
        if !has_heldout.contains(lang) {
            held[i] = true;
        }
    }
    let train = docs.iter().zip(&held).filter(|(_, &h)| !h).map(|(d, _)| d).collect();
    let test = docs.iter().zip(&held).filter(|(_, &h)| h).map(|(d, _)| d).collect();
    Ok((train, test))
}

pub fn compare_strategies(
    docs: &[Document],
    strategies: &[Strategy],
    config: &CompareConfig,
    registry: &LanguageRegistry,
) -> Result<StrategyComparison> {
    if strategies.is_empty() {
        return Err(Error::EmptyInput("strategy list"));
    }
    for d in docs {
        d.validate(Some(registry))?;
    }
    let languages: Vec<String> =
        docs.iter().map(|d| d.lang.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if languages.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "strategy comparison needs at least two languages, found {}",
            languages.len()
        )));
    }
    let (train, heldout) = heldout_split(docs, config.heldout_modulus)?;
    if train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let train_texts: Vec<&str> = train.iter().map(|d| d.text.as_str()).collect();

    let rows = strategies
        .par_iter()
        .map(|&strategy| {
            let tokenizer = train_bbpe(&train_texts, strategy, config.vocab_size)?;
            let streams: Vec<Vec<u32>> = train_texts.iter().map(|t| tokenizer.encode(t)).collect();
            let model = NGramModel::train(
                &streams,
                tokenizer.len(),
                config.ngram_order,
                config.add_k,
                &config.weights,
            )?;
            let scores = heldout
                .par_iter()
                .map(|d| {
                    Ok(DocScore {
                        doc_id: d.id.clone(),
                        lang: d.lang.clone(),
                        perplexity: char_perplexity(&model, &tokenizer, &d.text)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let heldout_tokens = heldout.iter().map(|d| tokenizer.encode(&d.text).len()).sum();
            let report = aggregate(&scores, registry, strategy.as_str(), Normalization::Char)?;
            Ok(StrategyRow {
                strategy,
                char_perplexity: report.language_mean(),
                reference: reference_perplexity(strategy),
                vocab_size: tokenizer.len(),
                merges: tokenizer.merges().len(),
                heldout_tokens,
                per_language: report.languages.into_iter().map(|(l, s)| (l, s.perplexity)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(StrategyComparison {
        config: config.clone(),
        languages,
        train_docs: train.len(),
        heldout_docs: heldout.len(),
        rows,
    })
}
