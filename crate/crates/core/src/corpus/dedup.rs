use std::collections::HashSet;

use super::{text_hash64, Document, FilterDecision, Verdict};

/// Keeps the first document for every distinct 64-bit text hash, preserving
/// input order. Returns the survivors and one decision per input document.
pub fn deduplicate(docs: &[Document]) -> (Vec<Document>, Vec<FilterDecision>) {
    let mut seen = HashSet::with_capacity(docs.len());
    let mut kept = Vec::with_capacity(docs.len());
    let mut decisions = Vec::with_capacity(docs.len());
    for doc in docs {
        if seen.insert(text_hash64(&doc.text)) {
            kept.push(doc.clone());
            decisions.push(FilterDecision::keep(&doc.id));
        } else {
            decisions.push(FilterDecision::drop(&doc.id, Verdict::DropDuplicate, 0.0));
        }
    }
    (kept, decisions)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::corpus::Source;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, "en", Source::Web, text)
    }

    #[test]
    fn keeps_first_occurrence() {
        let docs = vec![doc("a1", "A"), doc("b", "B"), doc("a2", "A")];
        let (kept, decisions) = deduplicate(&docs);
        assert_eq!(kept.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(), ["a1", "b"]);
        assert_eq!(decisions[2].verdict, Verdict::DropDuplicate);
        assert_eq!(decisions[2].doc_id, "a2");
    }

    #[test]
    fn distinct_corpus_is_untouched() {
        let docs: Vec<_> = (0..20).map(|i| doc(&i.to_string(), &format!("t{i}"))).collect();
        let (kept, _) = deduplicate(&docs);
        assert_eq!(kept, docs);
    }

    #[test]
    fn k_copies_of_m_texts() {
        let (m, k) = (7, 4);
        let docs: Vec<_> = (0..m * k)
            .map(|i| doc(&format!("d{i}"), &format!("text {}", i % m)))
            .collect();
        // brute force: distinct hashes
        let distinct: BTreeSet<u64> = docs.iter().map(|d| text_hash64(&d.text)).collect();
        let (kept, _) = deduplicate(&docs);
        assert_eq!(kept.len(), distinct.len());
        assert_eq!(kept.len(), m);
    }

    proptest! {
        #[test]
        fn idempotent_and_order_stable(texts in prop::collection::vec("[ab]{0,3}", 0..40)) {
            let docs: Vec<_> = texts
                .iter()
                .enumerate()
                .map(|(i, t)| doc(&format!("d{i}"), t))
                .collect();
            let (once, decisions) = deduplicate(&docs);
            let (twice, _) = deduplicate(&once);
            prop_assert_eq!(&once, &twice);
            prop_assert_eq!(decisions.len(), docs.len());
            let positions: Vec<usize> = once
                .iter()
                .map(|d| docs.iter().position(|x| x.id == d.id).unwrap())
                .collect();
            prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
