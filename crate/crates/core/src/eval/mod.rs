//! Zero- and few-shot evaluation by loss ranking and prompted generation.
//!
//! Every protocol reduces to scoring a full prompt string: encode it, sum the
//! negative log-probabilities of its tokens, and pick the lowest-loss
//! candidate. Randomness (demonstration sampling, probe distractors,
//! generation) draws from a stream keyed by `(seed, example index)`, so
//! results do not depend on how examples are spread over threads.

mod classify;
mod generate;
mod labeling;
mod probe;
mod template;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoringModel;
use crate::tokenizer::TextTokenizer;

pub use classify::{classify, evaluate_classification, ClassificationReport, ClassificationRun, Classified};
pub use generate::{
    build_generation_prompt, evaluate_generation, generate, postprocess, GenerationConfig,
    GenerationExample, GenerationReport, GenerationRun, GenerationTemplate, Generated,
};
pub use labeling::{
    evaluate_labeling, label_sequence, labeling_prefix, LabelingReport, LabelingRun, PrefixMode,
    TaggedSentence, TagSet,
};
pub use probe::{candidate_pools, probe_knowledge, KnowledgeTriple, LanguageProbe, ProbeOutcome, ProbeReport, RelationScore};
pub use template::{PromptTemplate, TaskExample, Verbalizer};

/// How token losses of a candidate prompt are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// Sum of per-token negative log-probabilities.
    #[default]
    Sum,
    /// Sum divided by the number of tokens.
    PerToken,
}

/// Loss of one rendered prompt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub loss: f64,
    pub tokens: usize,
}

impl CandidateScore {
    pub fn value(&self, mode: LossMode) -> f64 {
        match mode {
            LossMode::Sum => self.loss,
            LossMode::PerToken => self.loss / self.tokens.max(1) as f64,
        }
    }
}

/// `-Σ ln p(x_i | x_<i)` over the tokens of `prompt`.
pub fn candidate_loss<M, T>(model: &M, tokenizer: &T, prompt: &str) -> Result<f64>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    Ok(score_prompt(model, tokenizer, prompt)?.loss)
}

pub fn score_prompt<M, T>(model: &M, tokenizer: &T, prompt: &str) -> Result<CandidateScore>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    if prompt.is_empty() {
        return Err(Error::EmptyInput("prompt"));
    }
    let ids = tokenizer.encode(prompt);
    let total = crate::perplexity::total_log_prob(model, &ids)?;
    Ok(CandidateScore { loss: -total, tokens: ids.len() })
}

/// Index of the lowest value; the earliest wins ties.
pub(crate) fn argmin(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some(b) if values[b] <= v => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FewShotConfig {
    /// Demonstrations per prompt; 0 is zero-shot.
    pub k: usize,
    pub seed: u64,
    /// Run `r` uses seed `seed + r`.
    pub num_runs: usize,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        Self { k: 0, seed: 0, num_runs: 1 }
    }
}

impl FewShotConfig {
    pub fn zero_shot() -> Self {
        Self::default()
    }

    /// `k` shots over five runs.
    pub fn few_shot(k: usize, seed: u64) -> Self {
        Self { k, seed, num_runs: 5 }
    }

    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.num_runs == 0 {
            return Err(Error::InvalidArgument("num_runs must be at least 1".into()));
        }
        if self.k > pool_size {
            return Err(Error::InvalidArgument(format!(
                "{} demonstrations requested from a pool of {pool_size}",
                self.k
            )));
        }
        Ok(())
    }

    pub fn run_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.num_runs as u64).map(move |r| self.seed.wrapping_add(r))
    }
}

/// `k` distinct pool indices for example `index` under `seed`.
pub fn sample_demos(pool_size: usize, k: usize, seed: u64, index: usize) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let mut rng = crate::rng::stream(seed, index as u64);
    sample(&mut rng, pool_size, k).into_vec()
}

pub(crate) fn sample_without<R: Rng>(rng: &mut R, pool: &[&str], k: usize) -> Vec<String> {
    sample(rng, pool.len(), k).into_iter().map(|i| pool[i].to_string()).collect()
}
