//! Byte-level BPE training.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};

use super::model::{TokenKind, TokenizerModel, SPECIALS};
use super::pretransform::{pretransform, Segment};
use super::Strategy;
use crate::error::{Error, Result};

#[derive(PartialEq, Eq)]
struct Candidate {
    count: i64,
    // Ties go to the lexicographically smallest (left bytes, right bytes).
    key: Reverse<(Vec<u8>, Vec<u8>)>,
    pair: (u32, u32),
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count.cmp(&other.count).then_with(|| self.key.cmp(&other.key))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn segment_texts(text: &str, strategy: Strategy) -> impl Iterator<Item = String> {
    pretransform(text, strategy).segments.into_iter().filter_map(|seg| match seg {
        Segment::Marker(_) => None,
        Segment::Text(s) => Some(s),
        Segment::Atomic(c) => Some(c.to_string()),
    })
}

/// Trains a tokenizer for `strategy`.
///
/// Byte-level strategies repeatedly merge the most frequent adjacent pair
/// inside segments until the vocabulary reaches `vocab_size` or no pair
/// occurs at least twice. The char strategy keeps the `vocab_size - 3` most
/// frequent characters and learns no merges.
pub fn train_bbpe<S: AsRef<str>>(
    corpus: &[S],
    strategy: Strategy,
    vocab_size: usize,
) -> Result<TokenizerModel> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("tokenizer training corpus is empty"));
    }
    let min = if strategy.is_byte_level() { 256 + SPECIALS.len() } else { SPECIALS.len() + 1 };
    if vocab_size < min {
        return Err(Error::InvalidArgument(format!(
            "vocab_size {vocab_size} is below the minimum {min} for strategy {strategy}"
        )));
    }
    if strategy.is_byte_level() {
        train_bytes(corpus, strategy, vocab_size)
    } else {
        train_chars(corpus, strategy, vocab_size)
    }
}

fn train_chars<S: AsRef<str>>(corpus: &[S], strategy: Strategy, vocab_size: usize) -> Result<TokenizerModel> {
    let mut counts: BTreeMap<char, u64> = BTreeMap::new();
    for text in corpus {
        for seg in segment_texts(text.as_ref(), strategy) {
            for c in seg.chars() {
                *counts.entry(c).or_default() += 1;
            }
        }
    }
    let mut chars: Vec<(char, u64)> = counts.into_iter().collect();
    chars.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    chars.truncate(vocab_size - SPECIALS.len());
    let tokens = SPECIALS
        .into_iter()
        .map(TokenKind::Special)
        .chain(chars.into_iter().map(|(c, _)| TokenKind::Bytes(c.to_string().into_bytes())))
        .collect();
    TokenizerModel::from_parts(strategy, tokens, Vec::new())
}

struct Word {
    symbols: Vec<u32>,
    freq: i64,
}

fn pairs(symbols: &[u32]) -> impl Iterator<Item = (u32, u32)> + '_ {
    symbols.windows(2).map(|w| (w[0], w[1]))
}

fn merge_word(symbols: &[u32], pair: (u32, u32), merged: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(symbols.len());
    let mut i = 0;
    while i < symbols.len() {
        if i + 1 < symbols.len() && (symbols[i], symbols[i + 1]) == pair {
            out.push(merged);
            i += 2;
        } else {
            out.push(symbols[i]);
            i += 1;
        }
    }
    out
}

fn train_bytes<S: AsRef<str>>(corpus: &[S], strategy: Strategy, vocab_size: usize) -> Result<TokenizerModel> {
    let mut word_counts: HashMap<String, i64> = HashMap::new();
    for text in corpus {
        for seg in segment_texts(text.as_ref(), strategy) {
            *word_counts.entry(seg).or_default() += 1;
        }
    }
    let mut sorted: Vec<(String, i64)> = word_counts.into_iter().collect();
    sorted.sort();
    let mut words: Vec<Word> = sorted
        .into_iter()
        .map(|(w, freq)| Word { symbols: w.bytes().map(u32::from).collect(), freq })
        .collect();

    let mut tokens: Vec<TokenKind> = (0..=255u8).map(|b| TokenKind::Bytes(vec![b])).collect();
    tokens.extend(SPECIALS.into_iter().map(TokenKind::Special));
    let mut by_bytes: HashMap<Vec<u8>, u32> = (0..=255u8).map(|b| (vec![b], u32::from(b))).collect();
    let bytes_of = |tokens: &[TokenKind], id: u32| match &tokens[id as usize] {
        TokenKind::Bytes(b) => b.clone(),
        TokenKind::Special(_) => unreachable!("specials never enter words"),
    };

    let mut counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut index: HashMap<(u32, u32), HashSet<usize>> = HashMap::new();
    for (wi, word) in words.iter().enumerate() {
        for p in pairs(&word.symbols) {
            *counts.entry(p).or_default() += word.freq;
            index.entry(p).or_default().insert(wi);
        }
    }
    let candidate = |tokens: &[TokenKind], pair: (u32, u32), count: i64| Candidate {
        count,
        key: Reverse((bytes_of(tokens, pair.0), bytes_of(tokens, pair.1))),
        pair,
    };
    let mut heap: BinaryHeap<Candidate> =
        counts.iter().map(|(&p, &c)| candidate(&tokens, p, c)).collect();

    let mut merges = Vec::new();
    while tokens.len() < vocab_size {
        let Some(top) = heap.pop() else { break };
        let current = counts.get(&top.pair).copied().unwrap_or(0);
        if top.count != current {
            if current > 0 && current < top.count {
                heap.push(candidate(&tokens, top.pair, current));
            }
            continue;
        }
        if current < 2 {
            break;
        }
        let pair = top.pair;
        let joined = [bytes_of(&tokens, pair.0), bytes_of(&tokens, pair.1)].concat();
        let merged = match by_bytes.get(&joined) {
            Some(&id) => id,
            None => {
                let id = tokens.len() as u32;
                tokens.push(TokenKind::Bytes(joined.clone()));
                by_bytes.insert(joined, id);
                id
            }
        };
        merges.push(pair);

        let mut affected: Vec<usize> = index.remove(&pair).unwrap_or_default().into_iter().collect();
        affected.sort_unstable();
        let mut touched: HashSet<(u32, u32)> = HashSet::new();
        let mut decremented: Vec<(u32, u32)> = Vec::new();
        for wi in affected {
            let word = &mut words[wi];
            if !pairs(&word.symbols).any(|p| p == pair) {
                continue;
            }
            for p in pairs(&word.symbols) {
                *counts.get_mut(&p).expect("pair counted") -= word.freq;
                decremented.push(p);
            }
            word.symbols = merge_word(&word.symbols, pair, merged);
            for p in pairs(&word.symbols) {
                *counts.entry(p).or_default() += word.freq;
                index.entry(p).or_default().insert(wi);
                touched.insert(p);
            }
        }
        for p in decremented {
            if counts.get(&p).is_some_and(|&c| c <= 0) {
                counts.remove(&p);
            }
        }
        let mut touched: Vec<(u32, u32)> = touched.into_iter().collect();
        touched.sort_unstable();
        for p in touched {
            if let Some(&c) = counts.get(&p) {
                heap.push(candidate(&tokens, p, c));
            }
        }
    }
    TokenizerModel::from_parts(strategy, tokens, merges)
}
