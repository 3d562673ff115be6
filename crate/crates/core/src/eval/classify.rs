//! Classification by loss ranking over verbalized prompts.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::template::{PromptTemplate, TaskExample};
use super::{argmin, sample_demos, score_prompt, CandidateScore, FewShotConfig, LossMode};
use crate::error::{Error, Result};
use crate::scoring::ScoringModel;
use crate::tokenizer::TextTokenizer;

/// Best surface and its score for one label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub label: String,
    pub surface: String,
    pub score: CandidateScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classified {
    pub label: String,
    pub index: usize,
    pub candidates: Vec<LabelScore>,
}

/// Scores one prompt per label surface, demonstrations first, and returns
/// the label with the lowest loss. Ties go to the earlier label, and within
/// a label to the earlier surface.
pub fn classify<M, T>(
    model: &M,
    tokenizer: &T,
    template: &PromptTemplate,
    example: &TaskExample,
    demos: &[&TaskExample],
    mode: LossMode,
) -> Result<Classified>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    if template.verbalizers.len() < 2 {
        return Err(Error::InvalidArgument("classification needs at least two labels".into()));
    }
    let mut context = String::new();
    for d in demos {
        context.push_str(&template.render_gold(d)?);
        context.push_str(&template.separator);
    }

    let mut candidates = Vec::with_capacity(template.verbalizers.len());
    for v in &template.verbalizers {
        let mut best: Option<(String, CandidateScore)> = None;
        for surface in &v.surfaces {
            let prompt = format!("{context}{}", template.render(&example.inputs, surface)?);
            let score = score_prompt(model, tokenizer, &prompt)?;
            if best.as_ref().is_none_or(|(_, b)| score.value(mode) < b.value(mode)) {
                best = Some((surface.clone(), score));
            }
        }
        let (surface, score) = best.ok_or_else(|| Error::Template(format!("label `{}` has no surface", v.label)))?;
        candidates.push(LabelScore { label: v.label.clone(), surface, score });
    }
    let values: Vec<f64> = candidates.iter().map(|c| c.score.value(mode)).collect();
    let index = argmin(&values).ok_or(Error::EmptyInput("candidates"))?;
    Ok(Classified { label: candidates[index].label.clone(), index, candidates })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationRun {
    pub seed: u64,
    pub accuracy: f64,
    pub predictions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub task: String,
    pub lang: String,
    pub shots: usize,
    pub examples: usize,
    pub loss_mode: LossMode,
    pub runs: Vec<ClassificationRun>,
    /// Mean accuracy over runs.
    pub accuracy: f64,
}

/// Runs every example under each few-shot seed. Demonstrations for example
/// `i` in a run with seed `s` are drawn from `pool` by the `(s, i)` stream.
pub fn evaluate_classification<M, T>(
    model: &M,
    tokenizer: &T,
    template: &PromptTemplate,
    examples: &[TaskExample],
    pool: &[TaskExample],
    fewshot: &FewShotConfig,
    mode: LossMode,
) -> Result<ClassificationReport>
where
    M: ScoringModel + ?Sized,
    T: TextTokenizer + ?Sized,
{
    template.validate()?;
    fewshot.validate(pool.len())?;
    if examples.is_empty() {
        return Err(Error::EmptyInput("classification examples"));
    }
    for ex in examples.iter().chain(pool) {
        template.check_example(ex)?;
    }

    let mut runs = Vec::with_capacity(fewshot.num_runs);
    for seed in fewshot.run_seeds() {
        let predictions = examples
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let demos: Vec<&TaskExample> =
                    sample_demos(pool.len(), fewshot.k, seed, i).into_iter().map(|j| &pool[j]).collect();
                Ok(classify(model, tokenizer, template, ex, &demos, mode)?.label)
            })
            .collect::<Result<Vec<_>>>()?;
        let golds: Vec<String> = examples.iter().map(|e| e.gold.clone()).collect();
        let accuracy = crate::metrics::accuracy(&predictions, &golds)?;
        runs.push(ClassificationRun { seed, accuracy, predictions });
    }
    let accuracy = runs.iter().map(|r| r.accuracy).sum::<f64>() / runs.len() as f64;
    Ok(ClassificationReport {
        task: template.name.clone(),
        lang: template.lang.clone(),
        shots: fewshot.k,
        examples: examples.len(),
        loss_mode: mode,
        runs,
        accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::template::Verbalizer;
    use crate::scoring::{NGramModel, UniformModel};
    use crate::tokenizer::{train_bbpe, Strategy, TokenizerModel};

    fn tok() -> TokenizerModel {
        train_bbpe(&["<s>A, right? Yes, B</s> No Also"], Strategy::Char, 64).unwrap()
    }

    #[test]
    fn identical_renderings_pick_first_label() {
        let mut t = PromptTemplate::xnli("en");
        t.verbalizers = vec![Verbalizer::new("first", &["Yes"]), Verbalizer::new("second", &["Yes"])];
        let tk = tok();
        let m = UniformModel::new(tk.len());
        let ex = TaskExample::new(&[("sentence1", "A"), ("sentence2", "B")], "second");
        let c = classify(&m, &tk, &t, &ex, &[], LossMode::Sum).unwrap();
        assert_eq!(c.label, "first");
    }

    #[test]
    fn uniform_shift_keeps_argmin_on_equal_lengths() {
        let tk = tok();
        let streams = vec![tk.encode("<s>A, right? No, B</s>")];
        let m = NGramModel::train(&streams, tk.len(), 2, 0.1, &[0.5, 0.5]).unwrap();
        let mut t = PromptTemplate::xnli("en");
        t.verbalizers = vec![Verbalizer::new("yes", &["Ye"]), Verbalizer::new("no", &["No"])];
        let ex = TaskExample::new(&[("sentence1", "A"), ("sentence2", "B")], "no");
        let c = classify(&m, &tk, &t, &ex, &[], LossMode::Sum).unwrap();
        assert_eq!(c.candidates[0].score.tokens, c.candidates[1].score.tokens);
        for shift in [-3.0, 0.5, 10.0] {
            let shifted: Vec<f64> =
                c.candidates.iter().map(|x| x.score.loss + shift * x.score.tokens as f64).collect();
            assert_eq!(argmin(&shifted), Some(c.index));
        }
        assert_eq!(c.label, "no");
    }

    #[test]
    fn single_label_is_rejected() {
        let mut t = PromptTemplate::xnli("en");
        t.verbalizers.truncate(1);
        let tk = tok();
        let ex = TaskExample::new(&[("sentence1", "A"), ("sentence2", "B")], "entailment");
        assert!(classify(&UniformModel::new(tk.len()), &tk, &t, &ex, &[], LossMode::Sum).is_err());
    }

    #[test]
    fn fewshot_runs_are_reproducible() {
        let tk = tok();
        let m = UniformModel::new(tk.len());
        let t = PromptTemplate::xnli("en");
        let pool: Vec<TaskExample> = ["entailment", "neutral", "contradiction", "neutral"]
            .iter()
            .map(|g| TaskExample::new(&[("sentence1", "A"), ("sentence2", "B")], g))
            .collect();
        let cfg = FewShotConfig::few_shot(2, 11);
        let a = evaluate_classification(&m, &tk, &t, &pool, &pool, &cfg, LossMode::Sum).unwrap();
        let b = evaluate_classification(&m, &tk, &t, &pool, &pool, &cfg, LossMode::Sum).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![11, 12, 13, 14, 15]);
        let too_many = FewShotConfig::few_shot(9, 0);
        assert!(evaluate_classification(&m, &tk, &t, &pool, &pool, &too_many, LossMode::Sum).is_err());
    }
}
