//! Reversible pre-transform and atomic segmentation.

use super::{pretokenize, Strategy};
use crate::error::{Error, Result};

/// Case marker preceding a folded uppercase letter. `Spaced` also stands
/// for one space immediately before the letter, so " Birds" becomes
/// `[Spaced] "birds"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseMarker {
    Bare,
    Spaced,
}

/// A unit merges never cross.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment {
    Marker(CaseMarker),
    /// A pre-token: merges may join its bytes freely.
    Text(String),
    /// A single character isolated by the strategy.
    Atomic(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Pretransformed {
    pub segments: Vec<Segment>,
}

impl Pretransformed {
    /// Text dump with markers rendered as `<case>`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for seg in &self.segments {
            match seg {
                Segment::Marker(CaseMarker::Bare) => out.push_str("<case>"),
                Segment::Marker(CaseMarker::Spaced) => out.push_str(" <case>"),
                Segment::Text(s) => out.push_str(s),
                Segment::Atomic(c) => out.push(*c),
            }
        }
        out
    }
}

/// Lowercase partner of `c` when folding is exactly invertible.
pub(crate) fn fold(c: char) -> Option<char> {
    if !c.is_uppercase() {
        return None;
    }
    let lower = single(c.to_lowercase())?;
    (single(lower.to_uppercase()) == Some(c)).then_some(lower)
}

/// Inverse of [`fold`].
pub(crate) fn unfold(lower: char) -> Option<char> {
    let upper = single(lower.to_uppercase())?;
    (fold(upper) == Some(lower)).then_some(upper)
}

fn single(mut it: impl Iterator<Item = char>) -> Option<char> {
    let c = it.next()?;
    it.next().is_none().then_some(c)
}

enum Item {
    Char(char),
    Marker(CaseMarker),
}

pub fn pretransform(text: &str, strategy: Strategy) -> Pretransformed {
    let mut items: Vec<Item> = Vec::with_capacity(text.len());
    for c in text.chars() {
        match fold(c).filter(|_| strategy.folds_case()) {
            Some(lower) => {
                let marker = if matches!(items.last(), Some(Item::Char(' '))) {
                    items.pop();
                    CaseMarker::Spaced
                } else {
                    CaseMarker::Bare
                };
                items.push(Item::Marker(marker));
                items.push(Item::Char(lower));
            }
            None => items.push(Item::Char(c)),
        }
    }

    let mut segments = Vec::new();
    let mut run = String::new();
    let flush = |run: &mut String, segments: &mut Vec<Segment>| {
        if !run.is_empty() {
            segments.extend(pretokenize(run).into_iter().map(|s| Segment::Text(s.to_string())));
            run.clear();
        }
    };
    for item in items {
        match item {
            Item::Marker(m) => {
                flush(&mut run, &mut segments);
                segments.push(Segment::Marker(m));
            }
            Item::Char(c) if strategy.is_atomic(c) => {
                flush(&mut run, &mut segments);
                segments.push(Segment::Atomic(c));
            }
            Item::Char(c) => run.push(c),
        }
    }
    flush(&mut run, &mut segments);
    Pretransformed { segments }
}

/// Inverse of [`pretransform`]. A marker must be followed by a lowercase
/// letter whose uppercase form folds back to it.
pub fn detransform(input: &Pretransformed, strategy: Strategy) -> Result<String> {
    let mut out = String::new();
    let mut pending: Option<(usize, CaseMarker)> = None;
    for (position, seg) in input.segments.iter().enumerate() {
        let text: std::borrow::Cow<'_, str> = match seg {
            Segment::Marker(m) => {
                if !strategy.folds_case() || pending.is_some() {
                    return Err(Error::MalformedCaseMarker { position });
                }
                pending = Some((position, *m));
                continue;
            }
            Segment::Text(s) => s.as_str().into(),
            Segment::Atomic(c) => c.to_string().into(),
        };
        let mut chars = text.chars();
        if let Some((at, marker)) = pending.take() {
            let upper = chars
                .next()
                .and_then(unfold)
                .ok_or(Error::MalformedCaseMarker { position: at })?;
            if marker == CaseMarker::Spaced {
                out.push(' ');
            }
            out.push(upper);
        }
        out.push_str(chars.as_str());
    }
    if let Some((position, _)) = pending {
        return Err(Error::MalformedCaseMarker { position });
    }
    Ok(out)
}
