//! Tokenization strategies over a byte-level BPE core.
//!
//! Every strategy runs the same three steps: a reversible pre-transform
//! (case folding with a `<case>` marker for the case-aware strategies), a
//! split into segments that merges may never cross, and BPE (or plain
//! character lookup for [`Strategy::Char`]) inside each segment.

mod bpe;
mod io;
mod model;
mod pretokenize;
mod pretransform;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bpe::train_bbpe;
pub use model::{Special, TokenKind, TokenizerModel, SPECIALS};
pub use pretokenize::pretokenize;
pub use pretransform::{detransform, pretransform, CaseMarker, Pretransformed, Segment};

/// Default vocabulary size for desk-scale training.
pub const DEFAULT_VOCAB_SIZE: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Default,
    Case,
    Arithmetic,
    Combined,
    Char,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::Default, Strategy::Case, Strategy::Arithmetic, Strategy::Combined, Strategy::Char];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Default => "default",
            Strategy::Case => "case",
            Strategy::Arithmetic => "arithmetic",
            Strategy::Combined => "combined",
            Strategy::Char => "char",
        }
    }

    /// Whether uppercase letters are folded behind a case marker.
    pub fn folds_case(self) -> bool {
        matches!(self, Strategy::Case | Strategy::Arithmetic | Strategy::Combined)
    }

    pub fn is_byte_level(self) -> bool {
        self != Strategy::Char
    }

    /// Whether `c` forms a segment of its own under this strategy.
    pub fn is_atomic(self, c: char) -> bool {
        match self {
            Strategy::Default | Strategy::Case => false,
            Strategy::Arithmetic => is_arithmetic(c),
            Strategy::Combined => {
                is_arithmetic(c) || c.is_whitespace() || !c.is_alphanumeric()
            }
            Strategy::Char => true,
        }
    }
}

fn is_arithmetic(c: char) -> bool {
    c.is_ascii_digit() || matches!(c, '+' | '-' | '\u{2212}' | '*' | '/' | '=' | '%')
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tokenization strategy `{s}`")))
    }
}

/// What perplexity and the evaluation harness need from a tokenizer.
pub trait TextTokenizer: Send + Sync {
    fn encode(&self, text: &str) -> Vec<u32>;

    fn decode(&self, ids: &[u32]) -> Result<String>;

    /// Best-effort decoding for sampled output: invalid UTF-8 is replaced and
    /// dangling case markers are dropped.
    fn decode_lossy(&self, ids: &[u32]) -> String;

    fn vocab_size(&self) -> usize;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_tags_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("bpe".parse::<Strategy>().is_err());
    }

    #[test]
    fn atomic_classes() {
        assert!(!Strategy::Case.is_atomic('2'));
        assert!(Strategy::Arithmetic.is_atomic('2'));
        assert!(Strategy::Arithmetic.is_atomic('='));
        assert!(!Strategy::Arithmetic.is_atomic(' '));
        assert!(Strategy::Combined.is_atomic(' '));
        assert!(Strategy::Combined.is_atomic(','));
        assert!(!Strategy::Combined.is_atomic('b'));
        assert!(Strategy::Char.is_atomic('b'));
    }
}
