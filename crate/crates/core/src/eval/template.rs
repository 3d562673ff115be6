//! Prompt templates with `{slot}` placeholders and label verbalizers.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The slot filled with a verbalizer surface.
pub const MASK_SLOT: &str = "mask";

/// Surface strings standing in for one label. When a label has several
/// surfaces its loss is the minimum over them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verbalizer {
    pub label: String,
    pub surfaces: Vec<String>,
}

impl Verbalizer {
    pub fn new(label: &str, surfaces: &[&str]) -> Self {
        Self { label: label.into(), surfaces: surfaces.iter().map(|s| s.to_string()).collect() }
    }
}

/// A classification prompt. `{{` and `}}` produce literal braces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptTemplate {
    #[serde(default)]
    pub name: String,
    pub lang: String,
    pub pattern: String,
    pub verbalizers: Vec<Verbalizer>,
    /// Joins demonstrations and the target prompt.
    #[serde(default = "default_separator")]
    pub separator: String,
}

fn default_separator() -> String {
    "\n".into()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskExample {
    pub inputs: BTreeMap<String, String>,
    pub gold: String,
}

impl TaskExample {
    pub fn new(inputs: &[(&str, &str)], gold: &str) -> Self {
        Self {
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            gold: gold.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece<'a> {
    Literal(&'a str),
    Brace(char),
    Slot(&'a str),
}

fn parse(pattern: &str) -> Result<Vec<Piece<'_>>> {
    let mut pieces = Vec::new();
    let bytes = pattern.as_bytes();
    let mut i = 0;
    let mut lit_start = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'{' | b'}' if bytes.get(i + 1) == Some(&bytes[i]) => {
                pieces.push(Piece::Literal(&pattern[lit_start..i]));
                pieces.push(Piece::Brace(bytes[i] as char));
                i += 2;
                lit_start = i;
            }
            b'{' => {
                let end = pattern[i + 1..]
                    .find('}')
                    .ok_or_else(|| Error::Template(format!("unterminated slot at byte {i}")))?;
                let name = &pattern[i + 1..i + 1 + end];
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(Error::Template(format!("invalid slot name `{name}`")));
                }
                pieces.push(Piece::Literal(&pattern[lit_start..i]));
                pieces.push(Piece::Slot(name));
                i += end + 2;
                lit_start = i;
            }
            b'}' => return Err(Error::Template(format!("unmatched `}}` at byte {i}"))),
            _ => i += 1,
        }
    }
    pieces.push(Piece::Literal(&pattern[lit_start..]));
    Ok(pieces.into_iter().filter(|p| *p != Piece::Literal("")).collect())
}

/// Names of the slots in `pattern`, in order of first appearance.
pub fn slots(pattern: &str) -> Result<Vec<String>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for p in parse(pattern)? {
        if let Piece::Slot(name) = p {
            if seen.insert(name) {
                out.push(name.to_string());
            }
        }
    }
    Ok(out)
}

/// Substitutes every slot; `values` must cover all of them.
pub fn fill(pattern: &str, values: &dyn Fn(&str) -> Option<String>) -> Result<String> {
    let mut out = String::with_capacity(pattern.len());
    for p in parse(pattern)? {
        match p {
            Piece::Literal(s) => out.push_str(s),
            Piece::Brace(c) => out.push(c),
            Piece::Slot(name) => out.push_str(
                &values(name).ok_or_else(|| Error::Template(format!("no value for slot `{name}`")))?,
            ),
        }
    }
    Ok(out)
}

impl PromptTemplate {
    /// `<s>{sentence1}, right? {mask}, {sentence2}</s>` with Yes / Also / No.
    pub fn xnli(lang: &str) -> Self {
        Self {
            name: "xnli".into(),
            lang: lang.into(),
            pattern: "<s>{sentence1}, right? {mask}, {sentence2}</s>".into(),
            verbalizers: vec![
                Verbalizer::new("entailment", &["Yes"]),
                Verbalizer::new("neutral", &["Also"]),
                Verbalizer::new("contradiction", &["No"]),
            ],
            separator: default_separator(),
        }
    }

    pub fn pawsx(lang: &str) -> Self {
        Self {
            name: "pawsx".into(),
            lang: lang.into(),
            pattern: "<s>{sentence1}, right? {mask}, {sentence2}</s>".into(),
            verbalizers: vec![Verbalizer::new("paraphrase", &["Yes"]), Verbalizer::new("not_paraphrase", &["No"])],
            separator: default_separator(),
        }
    }

    /// Five surfaces per class; a class scores its best surface.
    pub fn hate_speech(lang: &str) -> Self {
        Self {
            name: "hate_speech".into(),
            lang: lang.into(),
            pattern: "<s>The sentence is {mask} {sentence}</s>".into(),
            verbalizers: vec![
                Verbalizer::new("normal", &["normal.", "common.", "ok.", "usual.", "acceptable."]),
                Verbalizer::new("hateful", &["sexist.", "racist.", "offensive.", "abusive.", "hateful."]),
            ],
            separator: default_separator(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let names = slots(&self.pattern)?;
        if !names.iter().any(|n| n == MASK_SLOT) {
            return Err(Error::Template(format!("pattern has no `{{{MASK_SLOT}}}` slot")));
        }
        if self.verbalizers.is_empty() {
            return Err(Error::Template("no verbalizers".into()));
        }
        let mut labels = BTreeSet::new();
        for v in &self.verbalizers {
            if v.surfaces.is_empty() {
                return Err(Error::Template(format!("label `{}` has no surface", v.label)));
            }
            if !labels.insert(&v.label) {
                return Err(Error::Template(format!("duplicate label `{}`", v.label)));
            }
        }
        Ok(())
    }

    /// Slots other than the mask; every example must fill these.
    pub fn input_slots(&self) -> Result<Vec<String>> {
        Ok(slots(&self.pattern)?.into_iter().filter(|s| s != MASK_SLOT).collect())
    }

    pub fn check_example(&self, example: &TaskExample) -> Result<()> {
        for slot in self.input_slots()? {
            if !example.inputs.contains_key(&slot) {
                return Err(Error::Template(format!("example lacks slot `{slot}`")));
            }
        }
        self.label_index(&example.gold).map(|_| ())
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.verbalizers
            .iter()
            .position(|v| v.label == label)
            .ok_or_else(|| Error::Template(format!("unknown label `{label}`")))
    }

    pub fn render(&self, inputs: &BTreeMap<String, String>, mask: &str) -> Result<String> {
        fill(&self.pattern, &|name| {
            if name == MASK_SLOT {
                Some(mask.to_string())
            } else {
                inputs.get(name).cloned()
            }
        })
    }

    /// The example with its gold label's first surface, as used in demonstrations.
    pub fn render_gold(&self, example: &TaskExample) -> Result<String> {
        let v = &self.verbalizers[self.label_index(&example.gold)?];
        self.render(&example.inputs, &v.surfaces[0])
    }
}
