//! Logistic-regression quality classifier over hashed character trigrams.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::hash::fnv1a;
use super::Document;
use crate::error::{Error, Result};

pub const FEATURE_BITS: u32 = 18;
pub const NUM_FEATURES: usize = 1 << FEATURE_BITS;

const BOUNDARY_START: char = '\u{2}';
const BOUNDARY_END: char = '\u{3}';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { epochs: 10, learning_rate: 0.5, l2: 1e-6, seed: 0 }
    }
}

/// Sparse L2-normalised trigram counts, sorted by feature index.
pub(crate) fn featurize(text: &str) -> Vec<(u32, f64)> {
    let chars: Vec<char> = std::iter::once(BOUNDARY_START)
        .chain(text.chars())
        .chain(std::iter::once(BOUNDARY_END))
        .collect();
    let mut counts: BTreeMap<u32, f64> = BTreeMap::new();
    let mut buf = [0u8; 12];
    for w in chars.windows(3) {
        let mut len = 0;
        for c in w {
            len += c.encode_utf8(&mut buf[len..]).len();
        }
        let idx = (fnv1a(&buf[..len]) & (NUM_FEATURES as u64 - 1)) as u32;
        *counts.entry(idx).or_insert(0.0) += 1.0;
    }
    let norm = counts.values().map(|v| v * v).sum::<f64>().sqrt();
    counts.into_iter().map(|(i, v)| (i, v / norm)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityClassifier {
    weights: Vec<f64>,
    bias: f64,
}

#[derive(Serialize, Deserialize)]
struct SparseModel {
    feature_bits: u32,
    bias: f64,
    weights: Vec<(u32, f64)>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl QualityClassifier {
    /// Trains by per-example SGD on the logistic loss. Positives are the
    /// reference-quality class (label 1).
    pub fn train(
        positives: &[Document],
        negatives: &[Document],
        config: &ClassifierConfig,
    ) -> Result<Self> {
        if positives.is_empty() || negatives.is_empty() {
            return Err(Error::EmptyInput("classifier needs both positive and negative documents"));
        }
        let mut examples: Vec<(Vec<(u32, f64)>, f64)> = positives
            .iter()
            .map(|d| (featurize(&d.text), 1.0))
            .chain(negatives.iter().map(|d| (featurize(&d.text), 0.0)))
            .collect();
        let mut model = Self { weights: vec![0.0; NUM_FEATURES], bias: 0.0 };
        let mut rng = crate::rng::seeded(config.seed);
        for epoch in 0..config.epochs {
            examples.shuffle(&mut rng);
            let lr = config.learning_rate / (1.0 + epoch as f64 * 0.1);
            for (features, label) in &examples {
                let err = model.probability_of(features) - label;
                for &(i, v) in features {
                    let w = &mut model.weights[i as usize];
                    *w -= lr * (err * v + config.l2 * *w);
                }
                model.bias -= lr * err;
            }
        }
        Ok(model)
    }

    fn probability_of(&self, features: &[(u32, f64)]) -> f64 {
        let z = self.bias + features.iter().map(|&(i, v)| self.weights[i as usize] * v).sum::<f64>();
        sigmoid(z)
    }

    /// Probability that `text` belongs to the positive class.
    pub fn probability(&self, text: &str) -> f64 {
        self.probability_of(&featurize(text))
    }

    pub fn to_json(&self) -> Result<String> {
        let sparse = SparseModel {
            feature_bits: FEATURE_BITS,
            bias: self.bias,
            weights: self
                .weights
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, &w)| (i as u32, w))
                .collect(),
        };
        Ok(serde_json::to_string(&sparse)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sparse: SparseModel = serde_json::from_str(s)?;
        if sparse.feature_bits != FEATURE_BITS {
            return Err(Error::parse("classifier", "feature_bits mismatch"));
        }
        let mut weights = vec![0.0; NUM_FEATURES];
        for (i, w) in sparse.weights {
            *weights
                .get_mut(i as usize)
                .ok_or_else(|| Error::parse("classifier", format!("feature {i} out of range")))? = w;
        }
        Ok(Self { weights, bias: sparse.bias })
    }
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;
    use crate::corpus::Source;

    fn docs(texts: impl IntoIterator<Item = String>) -> Vec<Document> {
        texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), "en", Source::Web, t))
            .collect()
    }

    fn accuracy(model: &QualityClassifier, pos: &[Document], neg: &[Document]) -> f64 {
        let hits = pos.iter().filter(|d| model.probability(&d.text) >= 0.5).count()
            + neg.iter().filter(|d| model.probability(&d.text) < 0.5).count();
        hits as f64 / (pos.len() + neg.len()) as f64
    }

    #[test]
    fn separable_classes_reach_full_training_accuracy() {
        let pos = docs((1..20).map(|i| "alpha ".repeat(i)));
        let neg = docs((1..20).map(|i| "omega ".repeat(i)));
        let model = QualityClassifier::train(&pos, &neg, &ClassifierConfig::default()).unwrap();
        assert_eq!(accuracy(&model, &pos, &neg), 1.0);
    }

    #[test]
    fn identical_classes_are_at_chance() {
        let mut rng = crate::rng::seeded(5);
        let texts: Vec<String> = (0..200)
            .map(|_| (0..30).map(|_| rng.gen_range('a'..='h')).collect())
            .collect();
        let all = docs(texts);
        let (train, held) = all.split_at(150);
        let model = QualityClassifier::train(train, train, &ClassifierConfig::default()).unwrap();
        let acc = accuracy(&model, held, held);
        assert!((acc - 0.5).abs() <= 0.1, "{acc}");
    }

    const WIKI_WORDS: &[&str] = &[
        "the", "river", "is", "a", "tributary", "of", "in", "located", "province", "century",
        "population", "was", "born", "city", "university", "studied", "history", "species",
        "family", "known", "for", "its", "region", "published", "during", "war", "empire",
        "language", "spoken", "northern", "southern", "capital", "founded", "by", "named",
    ];
    const BOILERPLATE: &[&str] = &[
        "click here", "subscribe now", "cookie policy", "all rights reserved", "login",
        "sign up", "free shipping", "buy now", "terms of service", "privacy", "share on",
        "read more", "download", "copyright", "best price", "limited offer", "newsletter",
    ];

    pub(crate) fn wiki_like(rng: &mut impl Rng) -> String {
        let n = rng.gen_range(15..40);
        let words: Vec<&str> = (0..n).map(|_| WIKI_WORDS[rng.gen_range(0..WIKI_WORDS.len())]).collect();
        let mut s = words.join(" ");
        s.push('.');
        s
    }

    pub(crate) fn boilerplate_like(rng: &mut impl Rng) -> String {
        let n = rng.gen_range(5..15);
        let parts: Vec<String> = (0..n)
            .map(|_| {
                let p = BOILERPLATE[rng.gen_range(0..BOILERPLATE.len())];
                if rng.gen_bool(0.3) { format!("{}!", p.to_uppercase()) } else { format!("{p} |") }
            })
            .collect();
        parts.join(" ")
    }

    #[test]
    fn wiki_versus_boilerplate_generalizes() {
        let mut rng = crate::rng::seeded(11);
        let pos = docs((0..500).map(|_| wiki_like(&mut rng)));
        let neg = docs((0..500).map(|_| boilerplate_like(&mut rng)));
        let model = QualityClassifier::train(&pos[..400], &neg[..400], &ClassifierConfig::default())
            .unwrap();
        let acc = accuracy(&model, &pos[400..], &neg[400..]);
        assert!(acc > 0.8, "{acc}");
    }

    #[test]
    fn training_is_deterministic_and_serializable() {
        let mut rng = crate::rng::seeded(1);
        let pos = docs((0..30).map(|_| wiki_like(&mut rng)));
        let neg = docs((0..30).map(|_| boilerplate_like(&mut rng)));
        let cfg = ClassifierConfig { seed: 9, ..Default::default() };
        let a = QualityClassifier::train(&pos, &neg, &cfg).unwrap();
        let b = QualityClassifier::train(&pos, &neg, &cfg).unwrap();
        assert_eq!(a, b);
        let back = QualityClassifier::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn empty_class_is_an_error() {
        let pos = docs(["x".to_string()]);
        assert!(QualityClassifier::train(&pos, &[], &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn short_texts_still_featurize() {
        assert!(!featurize("a").is_empty());
        let f = featurize("hello world");
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }
}
