//! BLEU with uniform weights, closest-reference brevity penalty and add-one
//! smoothing of orders with no match.
//!
//! Only orders for which the hypothesis has at least one n-gram contribute,
//! so short hypotheses are scored on the orders they can express.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// Sufficient statistics; corpus BLEU sums these over sentences.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuStats {
    /// Clipped matches per order, index 0 = unigrams.
    pub matched: Vec<usize>,
    /// Hypothesis n-grams per order.
    pub total: Vec<usize>,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuStats {
    pub fn new(pred: &str, refs: &[&str], max_n: usize) -> Self {
        let hyp: Vec<&str> = pred.split_whitespace().collect();
        let refs: Vec<Vec<&str>> = refs.iter().map(|r| r.split_whitespace().collect()).collect();
        let (matched, total) = (1..=max_n).map(|n| ngram_matches(&hyp, &refs, n)).unzip();
        Self { matched, total, hyp_len: hyp.len(), ref_len: closest_ref_len(hyp.len(), &refs) }
    }

    fn add(&mut self, other: &BleuStats) {
        if self.matched.is_empty() {
            self.matched = vec![0; other.matched.len()];
            self.total = vec![0; other.total.len()];
        }
        for n in 0..other.matched.len() {
            self.matched[n] += other.matched[n];
            self.total[n] += other.total[n];
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let orders: Vec<(usize, usize)> = self
            .matched
            .iter()
            .zip(&self.total)
            .filter(|(_, &t)| t > 0)
            .map(|(&m, &t)| (m, t))
            .collect();
        let log_precision: f64 = orders
            .iter()
            .map(|&(m, t)| if m == 0 { (1.0 / (t + 1) as f64).ln() } else { (m as f64 / t as f64).ln() })
            .sum::<f64>()
            / orders.len() as f64;
        let bp = if self.hyp_len > self.ref_len {
            1.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        bp * log_precision.exp()
    }
}

/// `(clipped matches, hypothesis n-gram count)` for order `n`. A hypothesis
/// n-gram's count is clipped by its maximum count in any single reference.
pub fn ngram_matches(hyp: &[&str], refs: &[Vec<&str>], n: usize) -> (usize, usize) {
    let hyp_counts = counts(hyp, n);
    let ref_counts: Vec<_> = refs.iter().map(|r| counts(r, n)).collect();
    let matched = hyp_counts
        .iter()
        .map(|(g, &c)| {
            let max_ref = ref_counts.iter().map(|rc| rc.get(g).copied().unwrap_or(0)).max().unwrap_or(0);
            c.min(max_ref)
        })
        .sum();
    (matched, hyp.len().saturating_sub(n - 1))
}

fn counts<'a>(tokens: &[&'a str], n: usize) -> HashMap<Vec<&'a str>, usize> {
    let mut m = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w.to_vec()).or_insert(0) += 1;
        }
    }
    m
}

/// Reference length closest to the hypothesis length; ties go to the shorter.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<&str>]) -> usize {
    refs.iter()
        .map(|r| r.len())
        .min_by_key(|&l| (l.abs_diff(hyp_len), l))
        .unwrap_or(0)
}

pub fn sentence_bleu(pred: &str, refs: &[&str], max_n: usize) -> f64 {
    BleuStats::new(pred, refs, max_n).score()
}

pub fn corpus_bleu(pairs: &[(&str, Vec<&str>)], max_n: usize) -> f64 {
    let mut stats = BleuStats::default();
    for (pred, refs) in pairs {
        stats.add(&BleuStats::new(pred, refs, max_n));
    }
    stats.score()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_one() {
        assert_eq!(sentence_bleu("the cat sat on the mat", &["the cat sat on the mat"], 4), 1.0);
        assert_eq!(sentence_bleu("hello there", &["hello there"], 4), 1.0);
    }

    #[test]
    fn clipped_unigram_precision() {
        let s = BleuStats::new("the the the cat", &["the cat sat"], 4);
        assert_eq!((s.matched[0], s.total[0]), (2, 4));
    }

    #[test]
    fn disjoint_is_at_most_smoothing_floor() {
        let s = BleuStats::new("x y z", &["a b c"], 4);
        let floor = (1..=3).map(|n| 1.0 / (s.total[n - 1] + 1) as f64).product::<f64>().powf(1.0 / 3.0);
        assert!(sentence_bleu("x y z", &["a b c"], 4) <= floor);
    }

    #[test]
    fn reference_order_does_not_matter() {
        let a = sentence_bleu("a b c d e", &["a b x d e", "a b c"], 4);
        let b = sentence_bleu("a b c d e", &["a b c", "a b x d e"], 4);
        assert_eq!(a, b);
    }

    #[test]
    fn brevity_penalty_applies() {
        let short = sentence_bleu("a b", &["a b c d"], 2);
        assert!((short - (1.0f64 - 2.0).exp()).abs() < 1e-12);
    }

    #[test]
    fn empty_hypothesis_is_zero() {
        assert_eq!(sentence_bleu("", &["a"], 4), 0.0);
        assert_eq!(corpus_bleu(&[], 4), 0.0);
    }
}
