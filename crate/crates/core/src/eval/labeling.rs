//! Left-to-right sequence labeling, one loss-ranked decision per word.
//!
//! For word `i` the prompt is
//! `<s>lang: {lang} \n Tagged sentence: ` + `w_1_T_1 … w_{i-1}_T_{i-1}` + ` w_i_`
//! and each candidate tag is appended in turn.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmin, sample_demos, score_prompt, FewShotConfig};
use crate::error::{Error, Result};
use crate::metrics::{ner_f1, tag_precision, NER_TAGS, POS_TAGS};
use crate::scoring::ScoringModel;
use crate::tokenizer::TextTokenizer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet(pub Vec<String>);

impl TagSet {
    pub fn ner() -> Self {
        Self(NER_TAGS.iter().map(|t| t.to_string()).collect())
    }

    pub fn pos() -> Self {
        Self(POS_TAGS.iter().map(|t| t.to_string()).collect())
    }

    pub fn contains(&self, tag: &str) -> bool {
        self.0.iter().any(|t| t == tag)
    }

    fn is_ner(&self) -> bool {
        *self == Self::ner()
    }
}

/// Where the already-tagged words in a prefix get their tags from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefixMode {
    /// The model's own earlier decisions.
    #[default]
    Predicted,
    /// The reference tags.
    Gold,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub lang: String,
    pub words: Vec<String>,
    pub tags: Vec<String>,
}

impl TaggedSentence {
    pub fn new(lang: &str, pairs: &[(&str, &str)]) -> Self {
        Self {
            lang: lang.into(),
            words: pairs.iter().map(|p| p.0.to_string()).collect(),
            tags: pairs.iter().map(|p| p.1.to_string()).collect(),
        }
    }

    fn validate(&self, tagset: &TagSet) -> Result<()> {
        if self.words.is_empty() {
            return Err(Error::EmptyInput("sentence"));
        }
        if self.words.len() != self.tags.len() {
            return Err(Error::LengthMismatch { left: self.words.len(), right: self.tags.len() });
        }
        for t in &self.tags {
            if !tagset.contains(t) {
                return Err(Error::UnknownTag(t.clone()));
            }
        }
        Ok(())
    }

    /// The fully tagged sentence, as used for demonstrations.
    pub fn render(&self) -> String {
        let items: Vec<(&str, &str)> =
            self.words.iter().zip(&self.tags).map(|(w, t)| (w.as_str(), t.as_str())).collect();
        format!("{}{}", header(&self.lang), join_tagged(&items))
    }
}

fn header(lang: &str) -> String {
    format!("<s>lang: {lang} \n Tagged sentence: ")
}

fn join_tagged(items: &[(&str, &str)]) -> String {
    items.iter().map(|(w, t)| format!("{w}_{t}")).collect::<Vec<_>>().join(" ")
}

/// Prompt for tagging `word` after the already-tagged `(word, tag)` items.
pub fn labeling_prefix(lang: &str, tagged: &[(&str, &str)], word: &str) -> String {
    format!("{}{} {word}_", header(lang), join_tagged(tagged))
}

#[allow(clippy::too_many_arguments)]
pub fn label_sequence<M, T>(
    model: &M,
    tokenizer: &T,
    lang: &str,
    words: &[String],
    tagset: &TagSet,
    mode: PrefixMode,
    gold: Option<&[String]>,
    demos: &[&TaggedSentence],
) -> Result<Vec<String>>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    if tagset.0.is_empty() {
        return Err(Error::EmptyInput("tag set"));
    }
    if words.is_empty() {
        return Err(Error::EmptyInput("sentence"));
    }
    let gold = match (mode, gold) {
        (PrefixMode::Gold, Some(g)) if g.len() == words.len() => Some(g),
        (PrefixMode::Gold, Some(g)) => return Err(Error::LengthMismatch { left: words.len(), right: g.len() }),
        (PrefixMode::Gold, None) => {
            return Err(Error::InvalidArgument("gold prefix mode needs gold tags".into()))
        }
        (PrefixMode::Predicted, _) => None,
    };

    let mut context = String::new();
    for d in demos {
        context.push_str(&d.render());
        context.push('\n');
    }

    let mut predicted: Vec<String> = Vec::with_capacity(words.len());
    for (i, word) in words.iter().enumerate() {
        let prefix_tags: &[String] = gold.map_or(&predicted[..], |g| &g[..i]);
        let tagged: Vec<(&str, &str)> =
            words[..i].iter().zip(prefix_tags).map(|(w, t)| (w.as_str(), t.as_str())).collect();
        let prefix = format!("{context}{}", labeling_prefix(lang, &tagged, word));
        let losses = tagset
            .0
            .iter()
            .map(|tag| Ok(score_prompt(model, tokenizer, &format!("{prefix}{tag}"))?.loss))
            .collect::<Result<Vec<f64>>>()?;
        let best = argmin(&losses).ok_or(Error::EmptyInput("tag set"))?;
        predicted.push(tagset.0[best].clone());
    }
    Ok(predicted)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingRun {
    pub seed: u64,
    pub tag_precision: f64,
    pub ner_f1: Option<f64>,
    pub predictions: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingReport {
    pub sentences: usize,
    pub shots: usize,
    pub prefix_mode: PrefixMode,
    pub runs: Vec<LabelingRun>,
    pub tag_precision: f64,
    pub ner_f1: Option<f64>,
}

pub fn evaluate_labeling<M, T>(
    model: &M,
    tokenizer: &T,
    sentences: &[TaggedSentence],
    tagset: &TagSet,
    mode: PrefixMode,
    pool: &[TaggedSentence],
    fewshot: &FewShotConfig,
) -> Result<LabelingReport>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    fewshot.validate(pool.len())?;
    if sentences.is_empty() {
        return Err(Error::EmptyInput("labeling sentences"));
    }
    for s in sentences.iter().chain(pool) {
        s.validate(tagset)?;
    }
    let gold_flat: Vec<&str> = sentences.iter().flat_map(|s| s.tags.iter().map(String::as_str)).collect();
    let mut runs = Vec::new();
    for seed in fewshot.run_seeds() {
        let predictions = sentences
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let demos: Vec<&TaggedSentence> =
                    sample_demos(pool.len(), fewshot.k, seed, i).into_iter().map(|j| &pool[j]).collect();
                label_sequence(model, tokenizer, &s.lang, &s.words, tagset, mode, Some(&s.tags), &demos)
            })
            .collect::<Result<Vec<_>>>()?;
        let pred_flat: Vec<&str> = predictions.iter().flat_map(|p| p.iter().map(String::as_str)).collect();
        let ner = if tagset.is_ner() { Some(ner_f1(&pred_flat, &gold_flat)?) } else { None };
        runs.push(LabelingRun {
            seed,
            tag_precision: tag_precision(&pred_flat, &gold_flat)?,
            ner_f1: ner,
            predictions,
        });
    }
    let n = runs.len() as f64;
    let precision = runs.iter().map(|r| r.tag_precision).sum::<f64>() / n;
    let ner = if tagset.is_ner() { Some(runs.iter().filter_map(|r| r.ner_f1).sum::<f64>() / n) } else { None };
    Ok(LabelingReport {
        sentences: sentences.len(),
        shots: fewshot.k,
        prefix_mode: mode,
        runs,
        tag_precision: precision,
        ner_f1: ner,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::UniformModel;
    use crate::tokenizer::{train_bbpe, Strategy};

    #[test]
    fn prefixes_match_published_samples() {
        assert_eq!(labeling_prefix("en", &[], "I"), "<s>lang: en \n Tagged sentence:  I_");
        assert_eq!(labeling_prefix("en", &[("I", "PRON")], "want"), "<s>lang: en \n Tagged sentence: I_PRON want_");
    }

    #[test]
    fn single_tag_everywhere() {
        let tok = train_bbpe(&["abc"], Strategy::Default, 300).unwrap();
        let m = UniformModel::new(tok.len());
        let words: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let tags = TagSet(vec!["X".into()]);
        let out = label_sequence(&m, &tok, "en", &words, &tags, PrefixMode::Predicted, None, &[]).unwrap();
        assert_eq!(out, vec!["X"; 3]);
        assert!(label_sequence(&m, &tok, "en", &words, &TagSet(vec![]), PrefixMode::Predicted, None, &[]).is_err());
        assert!(label_sequence(&m, &tok, "en", &words, &tags, PrefixMode::Gold, None, &[]).is_err());
    }

    #[test]
    fn unknown_gold_tag_is_rejected() {
        let s = TaggedSentence::new("en", &[("x", "B-PER")]);
        assert!(s.validate(&TagSet::ner()).is_err());
    }
}
