//! Cloze-style knowledge probing with three candidates per query.
//!
//! Each query ranks the gold object against two distractors drawn uniformly
//! without replacement from the relation's candidate pool. The three
//! candidates are shuffled before scoring, so equal losses resolve in random
//! order rather than favouring the gold answer.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmin, sample_without, score_prompt};
use crate::error::{Error, Result};
use crate::scoring::ScoringModel;
use crate::tokenizer::TextTokenizer;

pub const SUBJECT_SLOT: &str = "[X]";
pub const OBJECT_SLOT: &str = "[Y]";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeTriple {
    pub lang: String,
    pub relation: String,
    pub subject: String,
    pub object: String,
    /// Sentence with `[X]` for the subject and `[Y]` for the object.
    pub template: String,
    /// Candidate objects; empty means every object seen for this language
    /// and relation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<String>,
}

impl KnowledgeTriple {
    pub fn fill(&self, object: &str) -> Result<String> {
        if !self.template.contains(OBJECT_SLOT) {
            return Err(Error::Template(format!("probe template lacks {OBJECT_SLOT}: `{}`", self.template)));
        }
        Ok(self.template.replace(SUBJECT_SLOT, &self.subject).replace(OBJECT_SLOT, object))
    }
}

/// Distinct objects per `(lang, relation)`, sorted.
pub fn candidate_pools(triples: &[KnowledgeTriple]) -> BTreeMap<(String, String), Vec<String>> {
    let mut pools: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
    for t in triples {
        pools.entry((t.lang.clone(), t.relation.clone())).or_default().insert(t.object.clone());
    }
    pools.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeOutcome {
    pub candidates: Vec<String>,
    pub losses: Vec<f64>,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScore {
    pub queries: usize,
    pub hits: usize,
    pub precision_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageProbe {
    pub relations: BTreeMap<String, RelationScore>,
    /// Unweighted mean over relations.
    pub precision_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub seed: u64,
    pub languages: BTreeMap<String, LanguageProbe>,
    pub outcomes: Vec<ProbeOutcome>,
}

pub fn probe_knowledge<M, T>(model: &M, tokenizer: &T, triples: &[KnowledgeTriple], seed: u64) -> Result<ProbeReport>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    if triples.is_empty() {
        return Err(Error::EmptyInput("probe triples"));
    }
    let pools = candidate_pools(triples);
    let outcomes = triples
        .par_iter()
        .enumerate()
        .map(|(i, t)| {
            let pool: &[String] = if t.candidates.is_empty() {
                &pools[&(t.lang.clone(), t.relation.clone())]
            } else {
                &t.candidates
            };
            let own: Vec<&str> = pool
                .iter()
                .map(String::as_str)
                .filter(|c| *c != t.object)
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            if own.len() < 2 {
                return Err(Error::InvalidArgument(format!(
                    "relation `{}` ({}) needs at least 3 candidates, has {}",
                    t.relation,
                    t.lang,
                    own.len() + 1
                )));
            }
            let mut rng = crate::rng::stream(seed, i as u64);
            let mut candidates = vec![t.object.clone()];
            candidates.extend(sample_without(&mut rng, &own, 2));
            candidates.shuffle(&mut rng);
            let losses = candidates
                .iter()
                .map(|c| Ok(score_prompt(model, tokenizer, &t.fill(c)?)?.loss))
                .collect::<Result<Vec<f64>>>()?;
            let best = argmin(&losses).ok_or(Error::EmptyInput("candidates"))?;
            let hit = candidates[best] == t.object;
            Ok(ProbeOutcome { candidates, losses, hit })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tallies: BTreeMap<&str, BTreeMap<&str, (usize, usize)>> = BTreeMap::new();
    for (t, o) in triples.iter().zip(&outcomes) {
        let e = tallies.entry(&t.lang).or_default().entry(&t.relation).or_insert((0, 0));
        e.0 += 1;
        e.1 += o.hit as usize;
    }
    let languages = tallies
        .into_iter()
        .map(|(lang, rels)| {
            let relations: BTreeMap<String, RelationScore> = rels
                .into_iter()
                .map(|(r, (queries, hits))| {
                    (r.to_string(), RelationScore { queries, hits, precision_at_1: hits as f64 / queries as f64 })
                })
                .collect();
            let mean = relations.values().map(|r| r.precision_at_1).sum::<f64>() / relations.len() as f64;
            (lang.to_string(), LanguageProbe { relations, precision_at_1: mean })
        })
        .collect();
    Ok(ProbeReport { seed, languages, outcomes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::UniformModel;
    use crate::tokenizer::{train_bbpe, Strategy};

    fn triple(rel: &str, subj: &str, obj: &str) -> KnowledgeTriple {
        KnowledgeTriple {
            lang: "en".into(),
            relation: rel.into(),
            subject: subj.into(),
            object: obj.into(),
            template: "[X] lives in [Y].".into(),
            candidates: vec![],
        }
    }

    #[test]
    fn distractors_differ_from_gold() {
        let triples: Vec<_> = ["aa", "bb", "cc", "dd"].iter().map(|o| triple("P1", "x", o)).collect();
        let tok = train_bbpe(&["x lives in aa bb cc dd."], Strategy::Char, 32).unwrap();
        let m = UniformModel::new(tok.len());
        let r = probe_knowledge(&m, &tok, &triples, 3).unwrap();
        for (t, o) in triples.iter().zip(&r.outcomes) {
            assert_eq!(o.candidates.len(), 3);
            assert_eq!(o.candidates.iter().filter(|c| **c == t.object).count(), 1);
            let distinct: BTreeSet<_> = o.candidates.iter().collect();
            assert_eq!(distinct.len(), 3);
        }
        assert_eq!(r, probe_knowledge(&m, &tok, &triples, 3).unwrap());
    }

    #[test]
    fn small_pool_is_rejected() {
        let triples = vec![triple("P1", "x", "aa"), triple("P1", "y", "bb")];
        let tok = train_bbpe(&["x y aa bb"], Strategy::Char, 32).unwrap();
        assert!(probe_knowledge(&UniformModel::new(tok.len()), &tok, &triples, 0).is_err());
    }
}
