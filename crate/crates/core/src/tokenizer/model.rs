use std::collections::HashMap;

use super::pretransform::{detransform, pretransform, unfold, CaseMarker, Pretransformed, Segment};
use super::{Strategy, TextTokenizer};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Special {
    Unk,
    Case,
    CaseSpaced,
}

/// Reserved tokens, in id order, present in every model.
pub const SPECIALS: [Special; 3] = [Special::Unk, Special::Case, Special::CaseSpaced];

impl Special {
    /// Unique name used in vocabulary files.
    pub fn name(self) -> &'static str {
        match self {
            Special::Unk => "<unk>",
            Special::Case => "<case>",
            Special::CaseSpaced => "<case_sp>",
        }
    }

    /// How the token is shown in token dumps. Both case markers print as
    /// `<case>`; the spaced one absorbs the preceding space.
    pub fn display(self) -> &'static str {
        match self {
            Special::Unk => "<unk>",
            Special::Case | Special::CaseSpaced => "<case>",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        SPECIALS.into_iter().find(|s| s.name() == name)
    }

    fn marker(self) -> Option<CaseMarker> {
        match self {
            Special::Unk => None,
            Special::Case => Some(CaseMarker::Bare),
            Special::CaseSpaced => Some(CaseMarker::Spaced),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Bytes(Vec<u8>),
    Special(Special),
}

/// A trained tokenizer. Byte-level strategies reserve ids 0..256 for single
/// bytes followed by [`SPECIALS`] and then merge products; the char strategy
/// starts with [`SPECIALS`] followed by observed characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizerModel {
    strategy: Strategy,
    tokens: Vec<TokenKind>,
    by_bytes: HashMap<Vec<u8>, u32>,
    merges: Vec<(u32, u32)>,
    /// pair -> (rank, merged id)
    ranks: HashMap<(u32, u32), (u32, u32)>,
    special_ids: [u32; SPECIALS.len()],
}

impl TokenizerModel {
    pub(crate) fn from_parts(
        strategy: Strategy,
        tokens: Vec<TokenKind>,
        merges: Vec<(u32, u32)>,
    ) -> Result<Self> {
        let mut by_bytes = HashMap::with_capacity(tokens.len());
        for (id, t) in tokens.iter().enumerate() {
            if let TokenKind::Bytes(b) = t {
                if by_bytes.insert(b.clone(), id as u32).is_some() {
                    return Err(Error::parse("vocab", format!("duplicate token at id {id}")));
                }
            }
        }
        let mut special_ids = [0u32; SPECIALS.len()];
        for (slot, special) in special_ids.iter_mut().zip(SPECIALS) {
            *slot = tokens
                .iter()
                .position(|t| *t == TokenKind::Special(special))
                .ok_or_else(|| Error::parse("vocab", format!("missing special {}", special.name())))?
                as u32;
        }
        if strategy.is_byte_level() {
            for b in 0..=255u8 {
                if by_bytes.get(&vec![b]) != Some(&u32::from(b)) {
                    return Err(Error::parse("vocab", format!("byte {b:#04x} must have id {b}")));
                }
            }
        } else if !merges.is_empty() {
            return Err(Error::parse("merges", "char strategy has no merges"));
        }
        let mut ranks = HashMap::with_capacity(merges.len());
        for (rank, &(l, r)) in merges.iter().enumerate() {
            let (Some(TokenKind::Bytes(lb)), Some(TokenKind::Bytes(rb))) =
                (tokens.get(l as usize), tokens.get(r as usize))
            else {
                return Err(Error::parse("merges", format!("merge {rank} has a non-byte operand")));
            };
            let joined = [lb.as_slice(), rb.as_slice()].concat();
            let merged = *by_bytes
                .get(&joined)
                .ok_or_else(|| Error::parse("merges", format!("merge {rank} product not in vocab")))?;
            ranks.entry((l, r)).or_insert((rank as u32, merged));
        }
        Ok(Self { strategy, tokens, by_bytes, merges, ranks, special_ids })
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn merges(&self) -> &[(u32, u32)] {
        &self.merges
    }

    pub fn token(&self, id: u32) -> Option<&TokenKind> {
        self.tokens.get(id as usize)
    }

    pub fn tokens(&self) -> &[TokenKind] {
        &self.tokens
    }

    pub fn special_id(&self, special: Special) -> u32 {
        let slot = SPECIALS.iter().position(|&s| s == special).expect("all specials listed");
        self.special_ids[slot]
    }

    pub fn id_of_bytes(&self, bytes: &[u8]) -> Option<u32> {
        self.by_bytes.get(bytes).copied()
    }

    /// Human-readable token text; see [`Special::display`].
    pub fn token_text(&self, id: u32) -> Option<String> {
        Some(match self.tokens.get(id as usize)? {
            TokenKind::Bytes(b) => String::from_utf8_lossy(b).into_owned(),
            TokenKind::Special(s) => s.display().to_string(),
        })
    }

    fn bpe(&self, bytes: &[u8], out: &mut Vec<u32>) {
        let mut ids: Vec<u32> = bytes.iter().map(|&b| u32::from(b)).collect();
        while ids.len() > 1 {
            let best = ids
                .windows(2)
                .filter_map(|w| self.ranks.get(&(w[0], w[1])).map(|&(rank, merged)| (rank, w[0], w[1], merged)))
                .min();
            let Some((_, l, r, merged)) = best else { break };
            let mut next = Vec::with_capacity(ids.len());
            let mut i = 0;
            while i < ids.len() {
                if i + 1 < ids.len() && ids[i] == l && ids[i + 1] == r {
                    next.push(merged);
                    i += 2;
                } else {
                    next.push(ids[i]);
                    i += 1;
                }
            }
            ids = next;
        }
        out.extend(ids);
    }

    fn encode_piece(&self, piece: &str, out: &mut Vec<u32>) {
        if self.strategy.is_byte_level() {
            self.bpe(piece.as_bytes(), out);
        } else {
            let unk = self.special_id(Special::Unk);
            let mut buf = [0u8; 4];
            out.extend(
                piece
                    .chars()
                    .map(|c| self.id_of_bytes(c.encode_utf8(&mut buf).as_bytes()).unwrap_or(unk)),
            );
        }
    }

    /// Token ids grouped by the segment they came from.
    pub fn encode_segments(&self, text: &str) -> Vec<Vec<u32>> {
        let mut buf = [0u8; 4];
        pretransform(text, self.strategy)
            .segments
            .iter()
            .map(|seg| {
                let mut ids = Vec::new();
                match seg {
                    Segment::Marker(CaseMarker::Bare) => ids.push(self.special_id(Special::Case)),
                    Segment::Marker(CaseMarker::Spaced) => {
                        ids.push(self.special_id(Special::CaseSpaced))
                    }
                    Segment::Text(s) => self.encode_piece(s, &mut ids),
                    Segment::Atomic(c) => self.encode_piece(c.encode_utf8(&mut buf), &mut ids),
                }
                ids
            })
            .collect()
    }

    pub fn encode(&self, text: &str) -> Vec<u32> {
        self.encode_segments(text).concat()
    }

    /// Token texts of `encode(text)`.
    pub fn tokenize(&self, text: &str) -> Vec<String> {
        self.encode(text)
            .into_iter()
            .map(|id| self.token_text(id).expect("encoded ids are in range"))
            .collect()
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        match ids.iter().find(|&&id| id as usize >= self.tokens.len()) {
            Some(&id) => Err(Error::TokenOutOfRange { id, vocab_size: self.tokens.len() }),
            None => Ok(()),
        }
    }

    /// Splits ids into byte runs and markers. `<unk>` becomes U+FFFD.
    fn pieces(&self, ids: &[u32]) -> Vec<Piece> {
        let mut pieces = Vec::new();
        let mut bytes = Vec::new();
        for &id in ids {
            match &self.tokens[id as usize] {
                TokenKind::Bytes(b) => bytes.extend_from_slice(b),
                TokenKind::Special(s) => match s.marker() {
                    Some(m) => {
                        if !bytes.is_empty() {
                            pieces.push(Piece::Bytes(std::mem::take(&mut bytes)));
                        }
                        pieces.push(Piece::Marker(m));
                    }
                    None => bytes.extend_from_slice(char::REPLACEMENT_CHARACTER.to_string().as_bytes()),
                },
            }
        }
        if !bytes.is_empty() {
            pieces.push(Piece::Bytes(bytes));
        }
        pieces
    }

    pub fn decode(&self, ids: &[u32]) -> Result<String> {
        self.check_ids(ids)?;
        let segments = self
            .pieces(ids)
            .into_iter()
            .map(|p| match p {
                Piece::Marker(m) => Ok(Segment::Marker(m)),
                Piece::Bytes(b) => String::from_utf8(b).map(Segment::Text).map_err(|_| Error::InvalidUtf8),
            })
            .collect::<Result<Vec<_>>>()?;
        detransform(&Pretransformed { segments }, self.strategy)
    }

    /// Never fails: out-of-range ids are skipped, invalid UTF-8 is replaced
    /// and markers that cannot be applied are dropped.
    pub fn decode_lossy(&self, ids: &[u32]) -> String {
        let valid: Vec<u32> = ids.iter().copied().filter(|&id| (id as usize) < self.tokens.len()).collect();
        let mut out = String::new();
        let mut pending: Option<CaseMarker> = None;
        for piece in self.pieces(&valid) {
            match piece {
                Piece::Marker(m) => {
                    if pending.replace(m) == Some(CaseMarker::Spaced) {
                        out.push(' ');
                    }
                }
                Piece::Bytes(b) => {
                    let text = String::from_utf8_lossy(&b);
                    let mut chars = text.chars();
                    if let Some(marker) = pending.take() {
                        if marker == CaseMarker::Spaced {
                            out.push(' ');
                        }
                        if let Some(first) = chars.next() {
                            out.push(unfold(first).unwrap_or(first));
                        }
                    }
                    out.push_str(chars.as_str());
                }
            }
        }
        if pending == Some(CaseMarker::Spaced) {
            out.push(' ');
        }
        out
    }
}

enum Piece {
    Bytes(Vec<u8>),
    Marker(CaseMarker),
}

impl TextTokenizer for TokenizerModel {
    fn encode(&self, text: &str) -> Vec<u32> {
        TokenizerModel::encode(self, text)
    }

    fn decode(&self, ids: &[u32]) -> Result<String> {
        TokenizerModel::decode(self, ids)
    }

    fn decode_lossy(&self, ids: &[u32]) -> String {
        TokenizerModel::decode_lossy(self, ids)
    }

    fn vocab_size(&self) -> usize {
        self.tokens.len()
    }
}
