//! Character- and token-normalised perplexity, with language and family
//! aggregation and the tokenization strategy comparison.
//!
//! `char_perplexity = exp(-(1/|c|) Σ_i ln p(x_i | x_<i))` where the sum runs
//! over the tokens of the encoded text and `|c|` is the number of Unicode
//! scalar values in the original text. Dividing by characters rather than
//! tokens puts tokenizers with different granularity on the same scale.

mod compare;
mod registry;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoringModel;
use crate::tokenizer::TextTokenizer;

pub use compare::{
    compare_strategies, reference_perplexity, CompareConfig, StrategyComparison, StrategyRow,
};
pub use registry::LanguageRegistry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Char,
    Token,
}

/// Sum of `ln p(ids[i] | ids[..i])`, accumulated with Neumaier compensation.
pub fn total_log_prob<M: ScoringModel + ?Sized>(model: &M, ids: &[u32]) -> Result<f64> {
    Ok(compensated_sum(model.sequence_log_probs(ids)?))
}

pub fn char_perplexity<M, T>(model: &M, tokenizer: &T, text: &str) -> Result<f64>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    if text.is_empty() {
        return Err(Error::EmptyInput("perplexity text"));
    }
    let chars = text.chars().count() as f64;
    let ids = tokenizer.encode(text);
    Ok((-total_log_prob(model, &ids)? / chars).exp())
}

/// As [`char_perplexity`] but normalised by the number of tokens.
///
/// The mean negative log-likelihood is accumulated incrementally so that a
/// constant per-token loss is reproduced without rounding drift.
pub fn token_perplexity<M, T>(model: &M, tokenizer: &T, text: &str) -> Result<f64>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    if text.is_empty() {
        return Err(Error::EmptyInput("perplexity text"));
    }
    let ids = tokenizer.encode(text);
    let mut mean = 0.0;
    for (k, lp) in model.sequence_log_probs(&ids)?.into_iter().enumerate() {
        mean += (-lp - mean) / (k + 1) as f64;
    }
    Ok(mean.exp())
}

/// Perplexity of one scored document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocScore {
    pub doc_id: String,
    pub lang: String,
    pub perplexity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageScore {
    pub family: String,
    pub perplexity: f64,
    pub docs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyScore {
    pub perplexity: f64,
    pub languages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub model: String,
    pub normalization: Normalization,
    pub docs: usize,
    pub languages: BTreeMap<String, LanguageScore>,
    pub families: BTreeMap<String, FamilyScore>,
}

impl PerplexityReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Unweighted mean over languages.
    pub fn language_mean(&self) -> f64 {
        mean_sorted(self.languages.values().map(|l| l.perplexity).collect())
    }
}

/// Language score is the mean over its documents; family score is the
/// unweighted mean over member languages present in `scores`.
pub fn aggregate(
    scores: &[DocScore],
    registry: &LanguageRegistry,
    model: &str,
    normalization: Normalization,
) -> Result<PerplexityReport> {
    let mut by_lang: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in scores {
        if !registry.contains(&s.lang) {
            return Err(Error::UnknownLanguage(s.lang.clone()));
        }
        if !(s.perplexity > 0.0 && s.perplexity.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "document `{}` has perplexity {}",
                s.doc_id, s.perplexity
            )));
        }
        by_lang.entry(&s.lang).or_default().push(s.perplexity);
    }

    let mut languages = BTreeMap::new();
    let mut by_family: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    for (lang, values) in by_lang {
        let family = registry.family(lang)?.to_string();
        let docs = values.len();
        let perplexity = mean_sorted(values);
        by_family.entry(family.clone()).or_default().push((lang.to_string(), perplexity));
        languages.insert(lang.to_string(), LanguageScore { family, perplexity, docs });
    }
    let families = by_family
        .into_iter()
        .map(|(family, members)| {
            let perplexity = mean_sorted(members.iter().map(|m| m.1).collect());
            let languages = members.into_iter().map(|m| m.0).collect();
            (family, FamilyScore { perplexity, languages })
        })
        .collect();

    Ok(PerplexityReport {
        model: model.to_string(),
        normalization,
        docs: scores.len(),
        languages,
        families,
    })
}

/// Mean with the summands sorted first, so the result does not depend on
/// input order.
pub(crate) fn mean_sorted(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    compensated_sum(values) / n
}

pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
