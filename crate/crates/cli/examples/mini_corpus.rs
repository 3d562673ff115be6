//! Writes the bundled three-language mini-corpus.
//!
//! ```text
//! cargo run -p lmcurate-cli --example mini_corpus -- data/mini_corpus.jsonl
//! ```
//!
//! Text is synthetic: a seeded Zipfian lexicon per language (forty real
//! function words plus syllable-built content words), sentence-initial
//! and proper-noun capitals, numbers, dates and small sums. Output is a pure
//! function of the seed.

use std::fmt::Write as _;

use lmcurate::corpus::{write_jsonl, Document, Source};
use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 20_220_415;
pub const DOCS_PER_LANGUAGE: usize = 190;

struct Lang {
    code: &'static str,
    function_words: &'static [&'static str],
    onsets: &'static [&'static str],
    nuclei: &'static [&'static str],
    codas: &'static [&'static str],
    /// Whether content nouns are capitalised, as in German.
    capitalise_nouns: bool,
    months: &'static [&'static str],
    equals: &'static str,
}

const EN: Lang = Lang {
    code: "en",
    function_words: &[
        "the", "of", "and", "to", "in", "a", "is", "was", "for", "on", "with", "as", "by", "that", "at",
        "from", "it", "his", "her", "an", "which", "are", "were", "also", "has", "had", "its", "after",
        "first", "new", "into", "their", "two", "one", "who", "this", "or", "be", "been", "more",
    ],
    onsets: &["b", "c", "d", "f", "g", "h", "l", "m", "n", "p", "r", "s", "t", "w", "br", "st", "tr", "ch", "sh", "th"],
    nuclei: &["a", "e", "i", "o", "u", "ea", "ou", "ai", "ee"],
    codas: &["", "", "n", "r", "s", "t", "nd", "ng", "ck", "ll", "st"],
    capitalise_nouns: false,
    months: &["January", "March", "May", "July", "September", "November"],
    equals: "equals",
};

const DE: Lang = Lang {
    code: "de",
    function_words: &[
        "der", "die", "und", "in", "den", "von", "zu", "das", "mit", "sich", "des", "auf", "für", "ist",
        "im", "dem", "nicht", "ein", "eine", "als", "auch", "es", "an", "wurde", "aus", "er", "hat", "dass",
        "sie", "nach", "bei", "einer", "um", "am", "sind", "noch", "wie", "über", "zwei", "seit",
    ],
    onsets: &["b", "d", "f", "g", "h", "k", "l", "m", "n", "r", "s", "t", "w", "z", "sch", "st", "br", "kr", "pf", "fr"],
    nuclei: &["a", "e", "i", "o", "u", "ei", "au", "ie", "ä", "ö", "ü"],
    codas: &["", "n", "r", "t", "ch", "ng", "ss", "lt", "nd", "rg", "ft"],
    capitalise_nouns: true,
    months: &["Januar", "März", "Mai", "Juli", "September", "November"],
    equals: "ergibt",
};

const RU: Lang = Lang {
    code: "ru",
    function_words: &[
        "и", "в", "не", "на", "с", "что", "по", "к", "из", "за", "от", "о", "для", "как", "это", "был",
        "была", "он", "она", "его", "её", "также", "году", "после", "при", "до", "а", "но", "или", "их",
        "один", "два", "года", "время", "было", "были", "который", "которая", "этом", "между",
    ],
    onsets: &["б", "в", "г", "д", "ж", "з", "к", "л", "м", "н", "п", "р", "с", "т", "ф", "х", "ч", "ш", "ст", "пр"],
    nuclei: &["а", "е", "и", "о", "у", "ы", "я", "ю", "ё"],
    codas: &["", "", "н", "р", "с", "т", "л", "й", "в", "ск", "ть"],
    capitalise_nouns: false,
    months: &["января", "марта", "мая", "июля", "сентября", "ноября"],
    equals: "равно",
};

fn capitalise(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct Lexicon {
    words: Vec<String>,
    nouns: Vec<bool>,
    zipf: WeightedIndex<f64>,
    names: Vec<String>,
}

impl Lexicon {
    fn new(lang: &Lang, rng: &mut ChaCha8Rng) -> Self {
        let mut words: Vec<String> = lang.function_words.iter().map(|w| w.to_string()).collect();
        let mut nouns = vec![false; words.len()];
        let mut seen: std::collections::HashSet<String> = words.iter().cloned().collect();
        let syllable = |rng: &mut ChaCha8Rng| {
            format!(
                "{}{}{}",
                lang.onsets[rng.gen_range(0..lang.onsets.len())],
                lang.nuclei[rng.gen_range(0..lang.nuclei.len())],
                lang.codas[rng.gen_range(0..lang.codas.len())]
            )
        };
        while words.len() < 2500 {
            let n = rng.gen_range(1..=3);
            let w: String = (0..n).map(|_| syllable(rng)).collect();
            if seen.insert(w.clone()) {
                words.push(w);
                nouns.push(rng.gen_bool(0.35));
            }
        }
        let zipf = WeightedIndex::new((1..=words.len()).map(|r| 1.0 / r as f64)).expect("positive weights");
        let names = (0..60).map(|_| capitalise(&format!("{}{}", syllable(rng), syllable(rng)))).collect();
        Self { words, nouns, zipf, names }
    }
}

fn sentence(lang: &Lang, lex: &Lexicon, rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(6..=18);
    let mut out: Vec<String> = Vec::with_capacity(len + 4);
    for i in 0..len {
        let roll: f64 = rng.gen();
        let word = if roll < 0.06 {
            lex.names[rng.gen_range(0..lex.names.len())].clone()
        } else if roll < 0.09 {
            rng.gen_range(2..2_000).to_string()
        } else if roll < 0.1 {
            format!("{} {} {}", rng.gen_range(1..29), lang.months[rng.gen_range(0..lang.months.len())], rng.gen_range(1800..2023))
        } else {
            let k = lex.zipf.sample(rng);
            let w = &lex.words[k];
            if lang.capitalise_nouns && lex.nouns[k] { capitalise(w) } else { w.clone() }
        };
        out.push(if i == 0 { capitalise(&word) } else { word });
        if i + 1 < len && rng.gen_bool(0.07) {
            out.last_mut().expect("non-empty").push(',');
        }
    }
    if rng.gen_bool(0.05) {
        let (a, b) = (rng.gen_range(1..100), rng.gen_range(1..100));
        out.push(format!("({a} + {b} {} {})", lang.equals, a + b));
    }
    let mut s = out.join(" ");
    s.push(if rng.gen_bool(0.9) { '.' } else { '?' });
    s
}

fn document(lang: &Lang, lex: &Lexicon, rng: &mut ChaCha8Rng) -> String {
    let paragraphs = rng.gen_range(2..=5);
    let mut text = String::new();
    for p in 0..paragraphs {
        if p > 0 {
            text.push('\n');
        }
        let sentences = rng.gen_range(3..=7);
        for s in 0..sentences {
            if s > 0 {
                text.push(' ');
            }
            text.push_str(&sentence(lang, lex, rng));
        }
    }
    text
}

/// The corpus as JSONL bytes.
pub fn generate(seed: u64) -> Vec<u8> {
    let mut docs = Vec::new();
    for (li, lang) in [EN, DE, RU].iter().enumerate() {
        let mut rng = lmcurate::rng::stream(seed, li as u64);
        let lex = Lexicon::new(lang, &mut rng);
        for i in 0..DOCS_PER_LANGUAGE {
            let source = if i % 2 == 0 { Source::Wiki } else { Source::Web };
            let mut id = String::new();
            let _ = write!(id, "{}-{i:04}", lang.code);
            docs.push(Document::new(id, lang.code, source, document(lang, &lex, &mut rng)));
        }
    }
    let mut out = Vec::new();
    write_jsonl(&mut out, &docs).expect("in-memory write");
    out
}

#[allow(dead_code)]
fn main() {
    let path = std::env::args().nth(1).unwrap_or_else(|| "data/mini_corpus.jsonl".into());
    let bytes = generate(SEED);
    std::fs::write(&path, &bytes).unwrap_or_else(|e| panic!("{path}: {e}"));
    eprintln!("wrote {} bytes to {path}", bytes.len());
}
