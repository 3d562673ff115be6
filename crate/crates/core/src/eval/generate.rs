//! Prompted generation with nucleus sampling and newline truncation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sample_demos;
use super::template::fill;
use crate::error::{Error, Result};
use crate::metrics::{corpus_bleu, exact_match, rouge_l, token_f1, Articles};
use crate::scoring::{sample_from, ScoringModel};
use crate::tokenizer::TextTokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub top_p: f64,
    /// 0 disables top-k filtering.
    pub top_k: usize,
    pub max_tokens: usize,
    pub num_shots: usize,
    /// Stop sampling once the continuation contains a newline.
    pub stop_at_newline: bool,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self { top_p: 0.85, top_k: 0, max_tokens: 50, num_shots: 0, stop_at_newline: true }
    }
}

impl GenerationConfig {
    /// Published settings for `tapaco`, `qg` and `xquad`.
    pub fn preset(task: &str, few_shot: bool) -> Result<Self> {
        let (top_p, top_k, max_tokens, num_shots) = match (task, few_shot) {
            ("tapaco", false) => (0.85, 0, 50, 0),
            ("tapaco", true) => (0.95, 0, 250, 5),
            ("qg", false) => (0.9, 0, 150, 0),
            ("qg", true) => (0.95, 1, 150, 3),
            // Zero-shot length is unpublished; reuse the few-shot budget.
            ("xquad", false) => (0.95, 1, 1250, 0),
            ("xquad", true) => (0.95, 0, 1250, 3),
            _ => return Err(Error::InvalidArgument(format!("no generation preset for task `{task}`"))),
        };
        Ok(Self { top_p, top_k, max_tokens, num_shots, stop_at_newline: true })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidArgument(format!("top_p must lie in (0, 1], got {}", self.top_p)));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidArgument("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// Prompt layout: `prefix` + demonstrations joined by `separator` + target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationTemplate {
    #[serde(default)]
    pub prefix: String,
    /// Uses `{input}` and `{output}`.
    pub demo: String,
    /// Uses `{input}`.
    pub target: String,
    #[serde(default = "newline")]
    pub separator: String,
}

fn newline() -> String {
    "\n".into()
}

impl GenerationTemplate {
    /// `Rephrase: {input} ==>`.
    pub fn tapaco() -> Self {
        Self {
            prefix: "Rephrase: ".into(),
            demo: "{input} ==> {output}".into(),
            target: "{input} ==>".into(),
            separator: newline(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationExample {
    pub input: String,
    #[serde(default)]
    pub answers: Vec<String>,
}

impl GenerationExample {
    pub fn new(input: &str, answers: &[&str]) -> Self {
        Self { input: input.into(), answers: answers.iter().map(|s| s.to_string()).collect() }
    }
}

pub fn build_generation_prompt(
    template: &GenerationTemplate,
    input: &str,
    demos: &[&GenerationExample],
) -> Result<String> {
    let mut out = template.prefix.clone();
    for d in demos {
        let output = d
            .answers
            .first()
            .ok_or_else(|| Error::InvalidArgument(format!("demonstration `{}` has no answer", d.input)))?;
        out.push_str(&fill(&template.demo, &|slot| match slot {
            "input" => Some(d.input.clone()),
            "output" => Some(output.clone()),
            _ => None,
        })?);
        out.push_str(&template.separator);
    }
    out.push_str(&fill(&template.target, &|slot| (slot == "input").then(|| input.to_string()))?);
    Ok(out)
}

/// Text before the first newline, without surrounding whitespace.
pub fn postprocess(raw: &str) -> String {
    raw.split('\n').next().unwrap_or("").trim().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub text: String,
    pub raw: String,
    pub tokens: Vec<u32>,
}

pub fn generate<M, T>(model: &M, tokenizer: &T, prompt: &str, config: &GenerationConfig, seed: u64) -> Result<Generated>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    config.validate()?;
    let mut rng = crate::rng::seeded(seed);
    let mut context = tokenizer.encode(prompt);
    let start = context.len();
    while context.len() - start < config.max_tokens {
        let next = sample_from(model, &context, config.top_p, config.top_k, &mut rng)?;
        context.push(next);
        if config.stop_at_newline && tokenizer.decode_lossy(&context[start..]).contains('\n') {
            break;
        }
    }
    let tokens = context[start..].to_vec();
    let raw = tokenizer.decode_lossy(&tokens);
    Ok(Generated { text: postprocess(&raw), raw, tokens })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub input: String,
    pub prompt: String,
    pub output: String,
    pub exact_match: f64,
    pub token_f1: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub seed: u64,
    pub config: GenerationConfig,
    pub examples: Vec<GenerationRun>,
    pub exact_match: f64,
    pub token_f1: f64,
    pub bleu: f64,
    pub rouge_l: f64,
}

/// Example `i` draws demonstrations and samples from streams keyed by `(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_generation<M, T>(
    model: &M,
    tokenizer: &T,
    template: &GenerationTemplate,
    examples: &[GenerationExample],
    pool: &[GenerationExample],
    config: &GenerationConfig,
    seed: u64,
    articles: &Articles,
) -> Result<GenerationReport>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    config.validate()?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("generation examples"));
    }
    if config.num_shots > pool.len() {
        return Err(Error::InvalidArgument(format!(
            "{} demonstrations requested from a pool of {}",
            config.num_shots,
            pool.len()
        )));
    }
    let sampling_seed = crate::rng::derive_seed(seed, u64::MAX);
    let runs = examples
        .par_iter()
        .enumerate()
        .map(|(i, ex)| {
            let demos: Vec<&GenerationExample> =
                sample_demos(pool.len(), config.num_shots, seed, i).into_iter().map(|j| &pool[j]).collect();
            let prompt = build_generation_prompt(template, &ex.input, &demos)?;
            let out = generate(model, tokenizer, &prompt, config, crate::rng::derive_seed(sampling_seed, i as u64))?;
            let answers: Vec<&str> = ex.answers.iter().map(String::as_str).collect();
            Ok(GenerationRun {
                input: ex.input.clone(),
                exact_match: exact_match(&out.text, &answers, articles),
                token_f1: token_f1(&out.text, &answers, articles),
                rouge_l: answers.iter().map(|a| rouge_l(&out.text, a)).fold(0.0, f64::max),
                prompt,
                output: out.text,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = runs.len() as f64;
    let pairs: Vec<(&str, Vec<&str>)> = runs
        .iter()
        .zip(examples)
        .map(|(r, e)| (r.output.as_str(), e.answers.iter().map(String::as_str).collect()))
        .collect();
    Ok(GenerationReport {
        seed,
        config: config.clone(),
        exact_match: runs.iter().map(|r| r.exact_match).sum::<f64>() / n,
        token_f1: runs.iter().map(|r| r.token_f1).sum::<f64>() / n,
        rouge_l: runs.iter().map(|r| r.rouge_l).sum::<f64>() / n,
        bleu: corpus_bleu(&pairs, 4),
        examples: runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::UniformModel;
    use crate::tokenizer::{train_bbpe, Strategy};

    #[test]
    fn tapaco_prompts() {
        let t = GenerationTemplate::tapaco();
        assert_eq!(build_generation_prompt(&t, "I eat cheese", &[]).unwrap(), "Rephrase: I eat cheese ==>");
        let demos = [
            GenerationExample::new("Today, it's Monday", &["It is Monday"]),
            GenerationExample::new("Where is the library?", &["Where's the library?"]),
            GenerationExample::new("Do you know English", &["Do you speak English?"]),
        ];
        let refs: Vec<&GenerationExample> = demos.iter().collect();
        assert_eq!(
            build_generation_prompt(&t, "I eat cheese", &refs).unwrap(),
            "Rephrase: Today, it's Monday ==> It is Monday\nWhere is the library? ==> Where's the library?\n\
             Do you know English ==> Do you speak English?\nI eat cheese ==>"
        );
    }

    #[test]
    fn presets() {
        let p = GenerationConfig::preset("tapaco", false).unwrap();
        assert_eq!((p.top_p, p.top_k, p.max_tokens), (0.85, 0, 50));
        let q = GenerationConfig::preset("qg", true).unwrap();
        assert_eq!((q.top_p, q.top_k, q.max_tokens, q.num_shots), (0.95, 1, 150, 3));
        assert!(GenerationConfig::preset("nope", false).is_err());
    }

    #[test]
    fn output_has_no_newline_and_respects_budget() {
        let tok = train_bbpe(&["ab\ncd ef\n"], Strategy::Char, 16).unwrap();
        let m = UniformModel::new(tok.len());
        let cfg = GenerationConfig { top_p: 1.0, top_k: 0, max_tokens: 12, num_shots: 0, stop_at_newline: true };
        let mut saw_newline = false;
        for seed in 0..200 {
            let g = generate(&m, &tok, "ab", &cfg, seed).unwrap();
            assert!(g.tokens.len() <= 12);
            assert!(!g.text.contains('\n'));
            saw_newline |= g.raw.contains('\n');
        }
        assert!(saw_newline);
    }

    #[test]
    fn greedy_is_deterministic() {
        let tok = train_bbpe(&["abcabc"], Strategy::Char, 16).unwrap();
        let m = UniformModel::new(tok.len());
        let cfg = GenerationConfig { top_p: 1.0, top_k: 1, max_tokens: 5, num_shots: 0, stop_at_newline: true };
        assert_eq!(generate(&m, &tok, "a", &cfg, 1).unwrap(), generate(&m, &tok, "a", &cfg, 99).unwrap());
    }

    #[test]
    fn postprocess_truncates() {
        assert_eq!(postprocess(" It is Monday\nnext"), "It is Monday");
        assert_eq!(postprocess("\nx"), "");
    }
}
