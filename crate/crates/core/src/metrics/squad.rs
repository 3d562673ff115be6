//! SQuAD-style answer normalisation, exact match and token F1.

use serde::{Deserialize, Serialize};

use super::bag;

/// Words removed during answer normalisation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Articles(pub Vec<String>);

impl Articles {
    pub fn english() -> Self {
        Self(vec!["a".into(), "an".into(), "the".into()])
    }

    pub fn none() -> Self {
        Self(Vec::new())
    }

    /// English articles for `en`, nothing for other languages.
    pub fn for_language(lang: &str) -> Self {
        if lang == "en" {
            Self::english()
        } else {
            Self::none()
        }
    }
}

impl Default for Articles {
    fn default() -> Self {
        Self::english()
    }
}

/// Lowercase, drop punctuation, drop articles, collapse whitespace.
///
/// Punctuation is any character that is neither alphanumeric nor whitespace.
pub fn normalize_answer(s: &str, articles: &Articles) -> String {
    let lowered = s.to_lowercase();
    let stripped: String =
        lowered.chars().filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    stripped
        .split_whitespace()
        .filter(|w| !articles.0.iter().any(|a| a == w))
        .collect::<Vec<_>>()
        .join(" ")
}

/// 1.0 when the normalised prediction equals any normalised gold.
pub fn exact_match<S: AsRef<str>>(pred: &str, golds: &[S], articles: &Articles) -> f64 {
    let p = normalize_answer(pred, articles);
    golds.iter().any(|g| normalize_answer(g.as_ref(), articles) == p) as u8 as f64
}

/// Best bag-of-tokens F1 against any gold answer.
pub fn token_f1<S: AsRef<str>>(pred: &str, golds: &[S], articles: &Articles) -> f64 {
    let p = normalize_answer(pred, articles);
    let p_tokens: Vec<&str> = p.split_whitespace().collect();
    golds
        .iter()
        .map(|g| {
            let g = normalize_answer(g.as_ref(), articles);
            let g_tokens: Vec<&str> = g.split_whitespace().collect();
            pair_f1(&p_tokens, &g_tokens)
        })
        .fold(0.0, f64::max)
}

fn pair_f1(pred: &[&str], gold: &[&str]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return (pred.is_empty() && gold.is_empty()) as u8 as f64;
    }
    let gold_bag = bag(gold);
    let common: usize = bag(pred)
        .iter()
        .map(|(t, &c)| c.min(gold_bag.get(t).copied().unwrap_or(0)))
        .sum();
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / pred.len() as f64;
    let recall = common as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        let en = Articles::english();
        assert_eq!(normalize_answer("The  Cat, sat!", &en), "cat sat");
        assert_eq!(normalize_answer("the cat", &Articles::none()), "the cat");
    }

    #[test]
    fn article_is_stripped_for_em() {
        assert_eq!(exact_match("the cat", &["cat"], &Articles::english()), 1.0);
        assert_eq!(exact_match("cat", &["dog"], &Articles::english()), 0.0);
    }

    #[test]
    fn f1_hand_case() {
        let f = token_f1("big red dog", &["red dog"], &Articles::english());
        assert!((f - 0.8).abs() < 1e-15);
        assert_eq!(token_f1("x", &["a b", "x"], &Articles::english()), 1.0);
        assert_eq!(token_f1("x", &[] as &[&str], &Articles::english()), 0.0);
    }
}
