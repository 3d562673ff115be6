//! Evaluation metrics. Every score lies in `[0, 1]`.

mod bleu;
mod squad;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bleu::{corpus_bleu, ngram_matches, sentence_bleu, BleuStats};
pub use squad::{exact_match, normalize_answer, token_f1, Articles};

/// Tags of the NER label set.
pub const NER_TAGS: [&str; 5] = ["I-LOC", "I-MISC", "I-ORG", "I-PER", "O"];

/// Universal POS tags.
pub const POS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub value: f64,
    pub support: usize,
}

impl MetricResult {
    pub fn new(name: impl Into<String>, value: f64, support: usize) -> Self {
        Self { name: name.into(), value, support }
    }
}

fn check_aligned<T>(preds: &[T], golds: &[T]) -> Result<()> {
    if preds.len() != golds.len() {
        return Err(Error::LengthMismatch { left: preds.len(), right: golds.len() });
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput("metric inputs"));
    }
    Ok(())
}

/// Fraction of positions where prediction equals gold.
pub fn accuracy<T: PartialEq>(preds: &[T], golds: &[T]) -> Result<f64> {
    check_aligned(preds, golds)?;
    let correct = preds.iter().zip(golds).filter(|(p, g)| p == g).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Micro-averaged per-token tag precision. Every position carries exactly one
/// predicted tag, so this is token accuracy over the flattened sequences.
pub fn tag_precision<S: AsRef<str>>(preds: &[S], golds: &[S]) -> Result<f64> {
    check_aligned(preds, golds)?;
    let correct = preds.iter().zip(golds).filter(|(p, g)| p.as_ref() == g.as_ref()).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// Micro F1 over non-`O` positions. Returns 0 when precision or recall is
/// undefined.
pub fn ner_f1<S: AsRef<str>>(preds: &[S], golds: &[S]) -> Result<f64> {
    check_aligned(preds, golds)?;
    for t in preds.iter().chain(golds) {
        if !NER_TAGS.contains(&t.as_ref()) {
            return Err(Error::UnknownTag(t.as_ref().to_string()));
        }
    }
    let (mut predicted, mut gold, mut correct) = (0usize, 0usize, 0usize);
    for (p, g) in preds.iter().zip(golds) {
        let (p, g) = (p.as_ref(), g.as_ref());
        predicted += (p != "O") as usize;
        gold += (g != "O") as usize;
        correct += (p != "O" && p == g) as usize;
    }
    if predicted == 0 || gold == 0 || correct == 0 {
        return Ok(0.0);
    }
    let precision = correct as f64 / predicted as f64;
    let recall = correct as f64 / gold as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// ROUGE-L F-measure (β = 1) over whitespace tokens.
pub fn rouge_l(pred: &str, gold: &str) -> f64 {
    let p: Vec<&str> = pred.split_whitespace().collect();
    let g: Vec<&str> = gold.split_whitespace().collect();
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let lcs = lcs_len(&p, &g);
    if lcs == 0 {
        return 0.0;
    }
    let precision = lcs as f64 / p.len() as f64;
    let recall = lcs as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

pub(crate) fn bag<'a>(tokens: &[&'a str]) -> HashMap<&'a str, usize> {
    let mut m = HashMap::new();
    for t in tokens {
        *m.entry(*t).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[1, 2], &[3, 4]).unwrap(), 0.0);
        assert_eq!(accuracy(&["a", "b", "c", "d"], &["a", "b", "c", "x"]).unwrap(), 0.75);
        assert!(matches!(accuracy(&[1], &[1, 2]), Err(Error::LengthMismatch { .. })));
        assert!(accuracy::<u8>(&[], &[]).is_err());
    }

    #[test]
    fn tag_precision_cases() {
        assert_eq!(tag_precision(&["NOUN", "VERB"], &["NOUN", "VERB"]).unwrap(), 1.0);
        assert_eq!(tag_precision(&["NOUN", "VERB"], &["ADJ", "ADV"]).unwrap(), 0.0);
    }

    #[test]
    fn ner_hand_count() {
        let f1 = ner_f1(&["I-PER", "O", "I-LOC"], &["I-PER", "O", "I-ORG"]).unwrap();
        assert!((f1 - 0.5).abs() < 1e-15);
        assert_eq!(ner_f1(&["I-PER", "O"], &["I-PER", "O"]).unwrap(), 1.0);
        assert_eq!(ner_f1(&["O", "O"], &["I-PER", "O"]).unwrap(), 0.0);
        assert!(matches!(ner_f1(&["B-PER"], &["O"]), Err(Error::UnknownTag(_))));
    }

    #[test]
    fn rouge_cases() {
        assert_eq!(rouge_l("a b c", "a b c"), 1.0);
        assert_eq!(rouge_l("a b", "c d"), 0.0);
        assert!((rouge_l("a b c d", "a c d e") - 0.75).abs() < 1e-15);
        assert_eq!(rouge_l("x y", "y x"), rouge_l("y x", "x y"));
    }
}
