use std::collections::BTreeMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::{Document, Source};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceCounts {
    pub char_count: u64,
    pub doc_count: u64,
}

impl AddAssign for SourceCounts {
    fn add_assign(&mut self, rhs: Self) {
        self.char_count += rhs.char_count;
        self.doc_count += rhs.doc_count;
    }
}

/// Character (unicode scalar) and document counts per language and source.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub languages: BTreeMap<String, BTreeMap<Source, SourceCounts>>,
}

impl CorpusStats {
    pub fn totals(&self) -> SourceCounts {
        let mut t = SourceCounts::default();
        for c in self.languages.values().flat_map(|m| m.values()) {
            t += *c;
        }
        t
    }

    pub fn language_totals(&self, lang: &str) -> SourceCounts {
        let mut t = SourceCounts::default();
        if let Some(m) = self.languages.get(lang) {
            for c in m.values() {
                t += *c;
            }
        }
        t
    }

    pub fn merge(&mut self, other: &CorpusStats) {
        for (lang, per_source) in &other.languages {
            let entry = self.languages.entry(lang.clone()).or_default();
            for (source, counts) in per_source {
                *entry.entry(*source).or_default() += *counts;
            }
        }
    }
}

pub fn compute_stats(docs: &[Document]) -> CorpusStats {
    let mut stats = CorpusStats::default();
    for doc in docs {
        *stats
            .languages
            .entry(doc.lang.clone())
            .or_default()
            .entry(doc.source)
            .or_default() += SourceCounts { char_count: doc.text.chars().count() as u64, doc_count: 1 };
    }
    stats
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn empty_corpus_is_zero() {
        let s = compute_stats(&[]);
        assert_eq!(s.totals(), SourceCounts::default());
    }

    #[test]
    fn sums_lengths() {
        let docs: Vec<_> = [5, 7, 9]
            .iter()
            .enumerate()
            .map(|(i, &n)| Document::new(i.to_string(), "en", Source::Web, "é".repeat(n)))
            .collect();
        let s = compute_stats(&docs);
        assert_eq!(s.language_totals("en"), SourceCounts { char_count: 21, doc_count: 3 });
    }

    fn arb_docs() -> impl Strategy<Value = Vec<Document>> {
        prop::collection::vec(
            (prop::sample::select(vec!["en", "ru", "de"]), any::<bool>(), "\\PC{1,20}"),
            0..30,
        )
        .prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (lang, wiki, text))| {
                    let source = if wiki { Source::Wiki } else { Source::Web };
                    Document::new(format!("d{i}"), lang, source, text)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn matches_recount_and_is_additive(docs in arb_docs(), split in 0usize..30) {
            let stats = compute_stats(&docs);
            // second-pass recount
            for lang in ["en", "ru", "de"] {
                for source in [Source::Wiki, Source::Web] {
                    let sel: Vec<_> = docs.iter().filter(|d| d.lang == lang && d.source == source).collect();
                    let expect = SourceCounts {
                        char_count: sel.iter().map(|d| d.text.chars().count() as u64).sum(),
                        doc_count: sel.len() as u64,
                    };
                    let got = stats.languages.get(lang).and_then(|m| m.get(&source)).copied().unwrap_or_default();
                    prop_assert_eq!(got, expect);
                }
            }
            let total_chars: u64 = docs.iter().map(|d| d.text.chars().count() as u64).sum();
            prop_assert_eq!(stats.totals().char_count, total_chars);
            let cut = split.min(docs.len());
            let mut merged = compute_stats(&docs[..cut]);
            merged.merge(&compute_stats(&docs[cut..]));
            prop_assert_eq!(merged, stats);
        }
    }
}
