use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const BUILTIN: &[(&str, &[&str])] = &[
    ("Afro-Asiatic", &["ar", "he"]),
    ("Austro-Asiatic", &["vi"]),
    ("Austronesian", &["id", "ms"]),
    ("Baltic", &["lt", "lv"]),
    ("Basque", &["eu"]),
    ("Dravidian", &["ml", "ta", "te"]),
    ("Indo-European (Armenian)", &["hy"]),
    ("Indo-European (Indo-Aryan)", &["bn", "hi", "mr", "ur"]),
    ("Indo-European (Germanic)", &["af", "da", "de", "en", "nl", "sv"]),
    ("Indo-European (Romance)", &["es", "fr", "it", "pt", "ro"]),
    ("Indo-European (Greek)", &["el"]),
    ("Indo-European (Iranian)", &["fa", "os", "tg"]),
    ("Japonic", &["ja"]),
    ("Kartvelian", &["ka"]),
    ("Koreanic", &["ko"]),
    ("Kra-Dai", &["th"]),
    ("Mongolic", &["bxr", "mn", "xal"]),
    ("Niger-Congo", &["sw", "yo"]),
    ("Slavic", &["be", "bg", "pl", "ru", "uk"]),
    ("Sino-Tibetan", &["my", "zh"]),
    ("Turkic (Karluk)", &["uz"]),
    ("Turkic (Kipchak)", &["ba", "kk", "ky", "tt"]),
    ("Turkic (Oghuz)", &["az", "cv", "tk", "tr"]),
    ("Turkic (Siberian)", &["sah", "tyv"]),
    ("Uralic", &["fi", "hu"]),
];

/// Language code to family name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageRegistry {
    families: BTreeMap<String, String>,
}

impl LanguageRegistry {
    /// The 60 evaluated languages grouped into 25 families.
    pub fn builtin() -> Self {
        let families = BUILTIN
            .iter()
            .flat_map(|(family, langs)| langs.iter().map(move |l| (l.to_string(), family.to_string())))
            .collect();
        Self { families }
    }

    pub fn from_pairs<I, L, F>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (L, F)>,
        L: Into<String>,
        F: Into<String>,
    {
        Self { families: pairs.into_iter().map(|(l, f)| (l.into(), f.into())).collect() }
    }

    pub fn contains(&self, lang: &str) -> bool {
        self.families.contains_key(lang)
    }

    pub fn family(&self, lang: &str) -> Result<&str> {
        self.families
            .get(lang)
            .map(String::as_str)
            .ok_or_else(|| Error::UnknownLanguage(lang.to_string()))
    }

    pub fn len(&self) -> usize {
        self.families.len()
    }

    pub fn is_empty(&self) -> bool {
        self.families.is_empty()
    }

    pub fn family_count(&self) -> usize {
        let mut names: Vec<&String> = self.families.values().collect();
        names.sort();
        names.dedup();
        names.len()
    }

    pub fn languages(&self) -> impl Iterator<Item = (&str, &str)> {
        self.families.iter().map(|(l, f)| (l.as_str(), f.as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_has_sixty_languages_in_twenty_five_families() {
        let r = LanguageRegistry::builtin();
        assert_eq!(r.len(), 60);
        assert_eq!(r.family_count(), 25);
        assert_eq!(r.family("kk").unwrap(), "Turkic (Kipchak)");
        assert!(r.family("xx").is_err());
    }
}
