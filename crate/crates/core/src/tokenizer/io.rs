//! Plain-text vocabulary and merges files.
//!
//! `vocab.txt` starts with a `#vocab strategy=<tag>` header followed by one
//! `<escaped-bytes> <id>` line per token; specials are written by name
//! (`<case>`). `merges.txt` starts with `#merges` and lists one
//! `<escaped-left> <escaped-right>` pair per line in training order. Bytes
//! outside `!`..`~`, plus `\` and `<`, are written as `\xHH`, so escaped
//! tokens never contain spaces and never start with `<`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::model::{Special, TokenKind, TokenizerModel};
use super::Strategy;
use crate::error::{Error, Result};

pub const VOCAB_FILE: &str = "vocab.txt";
pub const MERGES_FILE: &str = "merges.txt";

fn escape(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len());
    for &b in bytes {
        if (0x21..=0x7e).contains(&b) && b != b'\\' && b != b'<' {
            out.push(char::from(b));
        } else {
            let _ = write!(out, "\\x{b:02x}");
        }
    }
    out
}

fn unescape(s: &str, location: &str) -> Result<Vec<u8>> {
    let bytes = s.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'\\' {
            let hex = s
                .get(i + 2..i + 4)
                .filter(|_| bytes.get(i + 1) == Some(&b'x'))
                .ok_or_else(|| Error::parse(location, format!("bad escape in `{s}`")))?;
            out.push(
                u8::from_str_radix(hex, 16)
                    .map_err(|_| Error::parse(location, format!("bad escape in `{s}`")))?,
            );
            i += 4;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    if out.is_empty() {
        return Err(Error::parse(location, "empty token"));
    }
    Ok(out)
}

impl TokenizerModel {
    pub fn vocab_text(&self) -> String {
        let mut out = format!("#vocab strategy={}\n", self.strategy());
        for (id, token) in self.tokens().iter().enumerate() {
            let shown = match token {
                TokenKind::Bytes(b) => escape(b),
                TokenKind::Special(s) => s.name().to_string(),
            };
            let _ = writeln!(out, "{shown} {id}");
        }
        out
    }

    pub fn merges_text(&self) -> String {
        let mut out = String::from("#merges\n");
        for &(l, r) in self.merges() {
            let bytes = |id: u32| match self.token(id) {
                Some(TokenKind::Bytes(b)) => escape(b),
                _ => unreachable!("merge operands are byte tokens"),
            };
            let _ = writeln!(out, "{} {}", bytes(l), bytes(r));
        }
        out
    }

    pub fn from_texts(vocab: &str, merges: &str) -> Result<Self> {
        let mut lines = vocab.lines();
        let header = lines.next().ok_or_else(|| Error::parse("vocab:1", "missing header"))?;
        let strategy: Strategy = header
            .strip_prefix("#vocab strategy=")
            .ok_or_else(|| Error::parse("vocab:1", "expected `#vocab strategy=<tag>`"))?
            .parse()?;
        let mut tokens = Vec::new();
        for (n, line) in lines.enumerate() {
            let location = format!("vocab:{}", n + 2);
            let (shown, id) = line
                .rsplit_once(' ')
                .ok_or_else(|| Error::parse(&location, "expected `<token> <id>`"))?;
            let id: usize = id.parse().map_err(|_| Error::parse(&location, "bad id"))?;
            if id != tokens.len() {
                return Err(Error::parse(&location, format!("ids must be dense, expected {}", tokens.len())));
            }
            let token = if shown.starts_with('<') {
                TokenKind::Special(
                    Special::from_name(shown)
                        .ok_or_else(|| Error::parse(&location, format!("unknown special `{shown}`")))?,
                )
            } else {
                TokenKind::Bytes(unescape(shown, &location)?)
            };
            tokens.push(token);
        }

        let mut lines = merges.lines();
        if lines.next() != Some("#merges") {
            return Err(Error::parse("merges:1", "expected `#merges` header"));
        }
        let by_bytes: std::collections::HashMap<&[u8], u32> = tokens
            .iter()
            .enumerate()
            .filter_map(|(i, t)| match t {
                TokenKind::Bytes(b) => Some((b.as_slice(), i as u32)),
                TokenKind::Special(_) => None,
            })
            .collect();
        let mut pairs = Vec::new();
        for (n, line) in lines.enumerate() {
            let location = format!("merges:{}", n + 2);
            let (l, r) = line
                .split_once(' ')
                .ok_or_else(|| Error::parse(&location, "expected `<left> <right>`"))?;
            let lookup = |s: &str| -> Result<u32> {
                let b = unescape(s, &location)?;
                by_bytes
                    .get(b.as_slice())
                    .copied()
                    .ok_or_else(|| Error::parse(&location, format!("`{s}` not in vocab")))
            };
            pairs.push((lookup(l)?, lookup(r)?));
        }
        TokenizerModel::from_parts(strategy, tokens, pairs)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let vocab = dir.join(VOCAB_FILE);
        fs::write(&vocab, self.vocab_text()).map_err(|e| Error::io(&vocab, e))?;
        let merges = dir.join(MERGES_FILE);
        fs::write(&merges, self.merges_text()).map_err(|e| Error::io(&merges, e))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let vocab_path = dir.join(VOCAB_FILE);
        let vocab = fs::read_to_string(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
        let merges_path = dir.join(MERGES_FILE);
        let merges = fs::read_to_string(&merges_path).map_err(|e| Error::io(&merges_path, e))?;
        Self::from_texts(&vocab, &merges)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::tokenizer::Strategy;
    use crate::tokenizer::train_bbpe;

    #[test]
    fn escaping_is_reversible() {
        for b in 0..=255u8 {
            let e = escape(&[b]);
            assert!(!e.contains(' ') && !e.starts_with('<'));
            assert_eq!(unescape(&e, "t").unwrap(), vec![b]);
        }
    }

    #[test]
    fn files_roundtrip_byte_identically() {
        let corpus = ["Héllo wörld, 12 + 30 = 42!", "hello World <tag> \\ back\tslash"];
        for s in Strategy::ALL {
            let model = train_bbpe(&corpus, s, 320).unwrap();
            let (v, m) = (model.vocab_text(), model.merges_text());
            let back = TokenizerModel::from_texts(&v, &m).unwrap();
            assert_eq!(back, model);
            assert_eq!(back.vocab_text(), v);
            assert_eq!(back.merges_text(), m);
        }
    }

    #[test]
    fn save_and_load_directory() {
        let dir = std::env::temp_dir().join(format!("lmcurate-tok-{}", std::process::id()));
        let model = train_bbpe(&["abc abc abd"], Strategy::Default, 270).unwrap();
        model.save(&dir).unwrap();
        assert_eq!(TokenizerModel::load(&dir).unwrap(), model);
        let _ = fs::remove_dir_all(&dir);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let model = train_bbpe(&["abab"], Strategy::Default, 270).unwrap();
        let v = model.vocab_text();
        assert!(TokenizerModel::from_texts(&v.replace("#vocab strategy=default", "#vocab strategy=bpe"), "#merges\n").is_err());
        assert!(TokenizerModel::from_texts(&v, "#merges\nzz qq\n").is_err());
        assert!(TokenizerModel::from_texts(&v.replace("<case> ", "<nope> "), "#merges\n").is_err());
    }

    proptest! {
        #[test]
        fn unescape_inverts_escape(bytes in prop::collection::vec(any::<u8>(), 1..20)) {
            prop_assert_eq!(unescape(&escape(&bytes), "t").unwrap(), bytes);
        }
    }
}
