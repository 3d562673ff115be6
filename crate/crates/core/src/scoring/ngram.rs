//! Interpolated add-k n-gram model.
//!
//! `p(x | ctx) = Σ_k λ_k · (c(h_k, x) + a) / (c(h_k) + a·V)` where `h_k` is
//! the last `min(k-1, |ctx|)` tokens of the context, `c(h, x)` the count of
//! `h` followed by `x`, and `c(h)` the count of `h` followed by anything.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_id, ScoringModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab_size: usize,
    add_k: f64,
    weights: Vec<f64>,
    /// `counts[m]`: (m+1)-grams.
    counts: Vec<HashMap<Vec<u32>, u64>>,
    /// `histories[m]`: m-token histories followed by any token.
    histories: Vec<HashMap<Vec<u32>, u64>>,
}

#[derive(Serialize, Deserialize)]
struct Persisted {
    order: usize,
    vocab_size: usize,
    add_k: f64,
    weights: Vec<f64>,
    counts: Vec<Vec<(Vec<u32>, u64)>>,
}

impl NGramModel {
    pub fn train(
        streams: &[Vec<u32>],
        vocab_size: usize,
        order: usize,
        add_k: f64,
        weights: &[f64],
    ) -> Result<Self> {
        validate(vocab_size, order, add_k, weights)?;
        if streams.iter().all(Vec::is_empty) {
            return Err(Error::EmptyInput("n-gram training streams contain no tokens"));
        }
        let mut counts = vec![HashMap::new(); order];
        for stream in streams {
            for &id in stream {
                check_id(id, vocab_size)?;
            }
            for i in 0..stream.len() {
                for m in 0..order.min(i + 1) {
                    *counts[m].entry(stream[i - m..=i].to_vec()).or_insert(0) += 1;
                }
            }
        }
        Ok(Self::from_counts(order, vocab_size, add_k, weights.to_vec(), counts))
    }

    fn from_counts(
        order: usize,
        vocab_size: usize,
        add_k: f64,
        weights: Vec<f64>,
        counts: Vec<HashMap<Vec<u32>, u64>>,
    ) -> Self {
        let histories = counts
            .iter()
            .map(|table| {
                let mut h: HashMap<Vec<u32>, u64> = HashMap::new();
                for (gram, &c) in table {
                    *h.entry(gram[..gram.len() - 1].to_vec()).or_insert(0) += c;
                }
                h
            })
            .collect();
        Self { order, vocab_size, add_k, weights, counts, histories }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw count of an n-gram (length 1..=order).
    pub fn count(&self, gram: &[u32]) -> u64 {
        match gram.len() {
            0 => 0,
            len if len <= self.order => self.counts[len - 1].get(gram).copied().unwrap_or(0),
            _ => 0,
        }
    }

    /// Count of `history` followed by any token.
    pub fn history_count(&self, history: &[u32]) -> u64 {
        self.histories.get(history.len()).and_then(|t| t.get(history)).copied().unwrap_or(0)
    }

    fn history<'c>(&self, context: &'c [u32], k: usize) -> &'c [u32] {
        let m = (k - 1).min(context.len());
        &context[context.len() - m..]
    }

    fn probability(&self, context: &[u32], next: u32) -> f64 {
        let v = self.vocab_size as f64;
        let mut key = Vec::with_capacity(self.order);
        let mut p = 0.0;
        for k in 1..=self.order {
            let h = self.history(context, k);
            key.clear();
            key.extend_from_slice(h);
            key.push(next);
            let joint = self.counts[h.len()].get(&key).copied().unwrap_or(0) as f64;
            let hist = self.histories[h.len()].get(h).copied().unwrap_or(0) as f64;
            p += self.weights[k - 1] * (joint + self.add_k) / (hist + self.add_k * v);
        }
        p
    }

    pub fn to_json(&self) -> Result<String> {
        let counts = self
            .counts
            .iter()
            .map(|table| {
                let mut v: Vec<(Vec<u32>, u64)> = table.iter().map(|(g, &c)| (g.clone(), c)).collect();
                v.sort_unstable();
                v
            })
            .collect();
        Ok(serde_json::to_string(&Persisted {
            order: self.order,
            vocab_size: self.vocab_size,
            add_k: self.add_k,
            weights: self.weights.clone(),
            counts,
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Persisted = serde_json::from_str(s)?;
        validate(p.vocab_size, p.order, p.add_k, &p.weights)?;
        if p.counts.len() != p.order {
            return Err(Error::parse("ngram", "one count table per order expected"));
        }
        let mut counts = Vec::with_capacity(p.order);
        for (m, table) in p.counts.into_iter().enumerate() {
            let mut map = HashMap::with_capacity(table.len());
            for (gram, c) in table {
                if gram.len() != m + 1 || gram.iter().any(|&id| id as usize >= p.vocab_size) {
                    return Err(Error::parse("ngram", format!("bad {}-gram entry", m + 1)));
                }
                map.insert(gram, c);
            }
            counts.push(map);
        }
        Ok(Self::from_counts(p.order, p.vocab_size, p.add_k, p.weights, counts))
    }
}

fn validate(vocab_size: usize, order: usize, add_k: f64, weights: &[f64]) -> Result<()> {
    if vocab_size == 0 {
        return Err(Error::InvalidArgument("vocab_size must be positive".into()));
    }
    if order == 0 {
        return Err(Error::InvalidArgument("n-gram order must be at least 1".into()));
    }
    if !(add_k > 0.0 && add_k.is_finite()) {
        return Err(Error::InvalidArgument(format!("add_k must be positive, got {add_k}")));
    }
    if weights.len() != order
        || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite()))
        || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidArgument(format!(
            "need {order} non-negative interpolation weights summing to 1, got {weights:?}"
        )));
    }
    Ok(())
}

impl ScoringModel for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn max_context(&self) -> Option<usize> {
        Some(self.order - 1)
    }

    /// Same terms and summation order as `probability`, with each history
    /// looked up once.
    fn distribution(&self, context: &[u32]) -> Result<Vec<f64>> {
        let v = self.vocab_size as f64;
        let mut dist = vec![0.0; self.vocab_size];
        let mut key = Vec::with_capacity(self.order);
        for k in 1..=self.order {
            let h = self.history(context, k);
            let hist_count = self.histories[h.len()].get(h).copied().unwrap_or(0);
            let hist = hist_count as f64;
            let w = self.weights[k - 1];
            key.clear();
            key.extend_from_slice(h);
            key.push(0);
            for (x, p) in dist.iter_mut().enumerate() {
                let joint = if hist_count == 0 {
                    0.0
                } else {
                    *key.last_mut().expect("non-empty key") = x as u32;
                    self.counts[h.len()].get(&key).copied().unwrap_or(0) as f64
                };
                *p += w * (joint + self.add_k) / (hist + self.add_k * v);
            }
        }
        Ok(dist)
    }

    fn log_prob(&self, context: &[u32], next: u32) -> Result<f64> {
        check_id(next, self.vocab_size)?;
        Ok(self.probability(context, next).ln())
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    /// Recomputes p(x | ctx) by scanning the raw streams.
    fn brute_force(streams: &[Vec<u32>], v: usize, n: usize, a: f64, w: &[f64], ctx: &[u32], x: u32) -> f64 {
        let mut p = 0.0;
        for k in 1..=n {
            let m = (k - 1).min(ctx.len());
            let h = &ctx[ctx.len() - m..];
            let (mut joint, mut hist) = (0.0, 0.0);
            for s in streams {
                for i in m..s.len() {
                    if &s[i - m..i] == h {
                        hist += 1.0;
                        if s[i] == x {
                            joint += 1.0;
                        }
                    }
                }
            }
            p += w[k - 1] * (joint + a) / (hist + a * v as f64);
        }
        p
    }

    #[test]
    fn bigram_prefers_observed_transition() {
        let a = 0;
        let b = 1;
        let m = NGramModel::train(&[vec![a, b, a, b]], 2, 2, 0.1, &[0.1, 0.9]).unwrap();
        assert!(m.log_prob(&[a], b).unwrap() > m.log_prob(&[a], a).unwrap());
    }

    #[test]
    fn uniform_corpus_unigram_is_uniform() {
        let m = NGramModel::train(&[vec![0, 1, 2, 3, 3, 2, 1, 0]], 4, 1, 1.0, &[1.0]).unwrap();
        for p in m.distribution(&[2]).unwrap() {
            assert!((p - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn distributions_sum_to_one() {
        let mut rng = crate::rng::seeded(4);
        let streams: Vec<Vec<u32>> = (0..5).map(|_| (0..50).map(|_| rng.gen_range(0..12)).collect()).collect();
        let m = NGramModel::train(&streams, 12, 3, 0.5, &[0.2, 0.3, 0.5]).unwrap();
        for _ in 0..100 {
            let len = rng.gen_range(0..5);
            let ctx: Vec<u32> = (0..len).map(|_| rng.gen_range(0..12)).collect();
            let d = m.distribution(&ctx).unwrap();
            assert!(d.iter().all(|&p| p >= 0.0));
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            for (x, &p) in d.iter().enumerate() {
                assert_eq!(p.to_bits(), m.probability(&ctx, x as u32).to_bits());
            }
        }
    }

    #[test]
    fn log_prob_matches_brute_force() {
        let mut rng = crate::rng::seeded(8);
        let streams: Vec<Vec<u32>> = (0..4).map(|_| (0..40).map(|_| rng.gen_range(0..6)).collect()).collect();
        let w = [0.1, 0.2, 0.7];
        let m = NGramModel::train(&streams, 6, 3, 0.05, &w).unwrap();
        for _ in 0..200 {
            let ctx: Vec<u32> = (0..rng.gen_range(0..4)).map(|_| rng.gen_range(0..6)).collect();
            let x = rng.gen_range(0..6);
            let expected = brute_force(&streams, 6, 3, 0.05, &w, &ctx, x).ln();
            let got = m.log_prob(&ctx, x).unwrap();
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        }
    }

    #[test]
    fn single_token_vocab_is_certain() {
        let m = NGramModel::train(&[vec![0, 0, 0]], 1, 2, 1.0, &[0.5, 0.5]).unwrap();
        assert_eq!(m.log_prob(&[0], 0).unwrap(), 0.0);
    }

    #[test]
    fn invalid_configuration_is_rejected() {
        let s = [vec![0, 1]];
        assert!(NGramModel::train(&s, 2, 0, 1.0, &[]).is_err());
        assert!(NGramModel::train(&s, 2, 1, 0.0, &[1.0]).is_err());
        assert!(NGramModel::train(&s, 2, 2, 1.0, &[0.5, 0.6]).is_err());
        assert!(NGramModel::train(&[vec![]], 2, 1, 1.0, &[1.0]).is_err());
        assert!(NGramModel::train(&[vec![5]], 2, 1, 1.0, &[1.0]).is_err());
        let m = NGramModel::train(&s, 2, 1, 1.0, &[1.0]).unwrap();
        assert!(m.log_prob(&[], 2).is_err());
    }

    #[test]
    fn json_roundtrip_is_exact() {
        let m = NGramModel::train(&[vec![0, 1, 2, 1, 0, 2, 2]], 3, 3, 0.3, &[0.2, 0.3, 0.5]).unwrap();
        let s = m.to_json().unwrap();
        let back = NGramModel::from_json(&s).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json().unwrap(), s);
    }
}
