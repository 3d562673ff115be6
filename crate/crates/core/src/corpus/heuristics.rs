//! Language-agnostic cleaning heuristics.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{Document, FilterDecision, Verdict};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicThresholds {
    /// Minimum length in unicode scalar values.
    pub min_length: usize,
    pub max_digit_fraction: f64,
    /// Fraction of non-empty lines that repeat an earlier line.
    pub max_repeated_line_fraction: f64,
    pub max_mean_word_length: f64,
}

impl Default for HeuristicThresholds {
    fn default() -> Self {
        Self {
            min_length: 200,
            max_digit_fraction: 0.3,
            max_repeated_line_fraction: 0.3,
            max_mean_word_length: 20.0,
        }
    }
}

pub(crate) fn digit_fraction(text: &str) -> f64 {
    let (digits, total) = text
        .chars()
        .fold((0usize, 0usize), |(d, t), c| (d + usize::from(c.is_numeric()), t + 1));
    if total == 0 { 0.0 } else { digits as f64 / total as f64 }
}

pub(crate) fn repeated_line_fraction(text: &str) -> f64 {
    let mut seen = HashSet::new();
    let mut lines = 0usize;
    let mut repeats = 0usize;
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        lines += 1;
        if !seen.insert(line) {
            repeats += 1;
        }
    }
    if lines == 0 { 0.0 } else { repeats as f64 / lines as f64 }
}

pub(crate) fn mean_word_length(text: &str) -> f64 {
    let (chars, words) = text
        .split_whitespace()
        .fold((0usize, 0usize), |(c, w), word| (c + word.chars().count(), w + 1));
    if words == 0 { 0.0 } else { chars as f64 / words as f64 }
}

pub fn heuristic_filter(doc: &Document, thresholds: &HeuristicThresholds) -> FilterDecision {
    let violated = doc.text.chars().count() < thresholds.min_length
        || digit_fraction(&doc.text) > thresholds.max_digit_fraction
        || repeated_line_fraction(&doc.text) > thresholds.max_repeated_line_fraction
        || mean_word_length(&doc.text) > thresholds.max_mean_word_length;
    if violated {
        FilterDecision::drop(&doc.id, Verdict::DropHeuristic, 0.0)
    } else {
        FilterDecision::keep(&doc.id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Source;

    fn doc(text: &str) -> Document {
        Document::new("d", "en", Source::Web, text)
    }

    const PARAGRAPH: &str = "The river rises in the northern hills and flows south through \
        a broad valley before joining the larger stream near the old market town. Its banks \
        are lined with willows, and several mills were built along its course during the \
        eighteenth century.";

    #[test]
    fn short_document_is_dropped() {
        let t = HeuristicThresholds { min_length: 100, ..Default::default() };
        assert_eq!(heuristic_filter(&doc("0123456789"), &t).verdict, Verdict::DropHeuristic);
    }

    #[test]
    fn clean_paragraph_is_kept() {
        assert!(PARAGRAPH.chars().count() >= 200);
        let d = heuristic_filter(&doc(PARAGRAPH), &HeuristicThresholds::default());
        assert_eq!(d.verdict, Verdict::Keep);
    }

    #[test]
    fn digit_heavy_document_is_dropped() {
        let text: String = "a1".repeat(150);
        // brute-force count
        let digits = text.chars().filter(|c| c.is_ascii_digit()).count();
        assert_eq!(digits * 2, text.chars().count());
        let t = HeuristicThresholds { max_digit_fraction: 0.3, ..Default::default() };
        assert_eq!(heuristic_filter(&doc(&text), &t).verdict, Verdict::DropHeuristic);
    }

    #[test]
    fn repeated_lines_are_dropped() {
        let text = format!("{PARAGRAPH}\n{}", "Subscribe to our newsletter\n".repeat(5));
        assert!((repeated_line_fraction(&text) - 4.0 / 6.0).abs() < 1e-12);
        let d = heuristic_filter(&doc(&text), &HeuristicThresholds::default());
        assert_eq!(d.verdict, Verdict::DropHeuristic);
    }

    #[test]
    fn long_words_are_dropped() {
        let text = format!("{PARAGRAPH} {}", "x".repeat(2000));
        assert!(mean_word_length(&text) > 20.0);
        let d = heuristic_filter(&doc(&text), &HeuristicThresholds::default());
        assert_eq!(d.verdict, Verdict::DropHeuristic);
    }
}
