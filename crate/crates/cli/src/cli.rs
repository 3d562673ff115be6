//! Command-line surface. Every flag overrides the matching config entry.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use lmcurate::corpus::{ClassifierStage, StageOrder};
use lmcurate::eval::{LossMode, PrefixMode};
use lmcurate::perplexity::Normalization;
use lmcurate::report::SortOrder;
use lmcurate::tokenizer::Strategy;
use serde::de::DeserializeOwned;

use crate::config::{Backend, BuiltinTemplate, Needs, PathKind, RunConfig, TagSetName, CONFIG_ENV};

#[derive(Debug, Parser)]
#[command(name = "lmcurate", version, about = "Corpus curation, tokenization, perplexity and prompt evaluation")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (0 = one per core). Outputs do not depend on this.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Manifest path. Defaults to `<output>.manifest.json`, or
    /// `lmcurate.manifest.json` when writing to stdout.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// De-duplicate and filter a JSONL corpus.
    Pipeline(PipelineArgs),
    /// Train a tokenizer and write vocab.txt and merges.txt into a directory.
    TokTrain(TokTrainArgs),
    /// Encode a file to space-separated token ids.
    TokEncode(CodecArgs),
    /// Decode space-separated token ids back to text.
    TokDecode(CodecArgs),
    /// Train a scoring model on a tokenized corpus.
    LmTrain(LmTrainArgs),
    /// Per-document, per-language and per-family perplexity.
    Ppl(PplArgs),
    /// Train and score every tokenization strategy on a held-out split.
    CompareStrategies(CompareArgs),
    /// Zero/few-shot classification by loss ranking.
    EvalClassify(ClassifyArgs),
    /// Word-by-word sequence labeling.
    EvalLabel(LabelArgs),
    /// Cloze knowledge probing with three candidates per query.
    Probe(ProbeArgs),
    /// Prompted generation with nucleus sampling.
    Generate(GenerateArgs),
    /// Document and character counts per language and source.
    Stats(StatsArgs),
    /// Render a report or a flat key/value JSON object as an SVG bar chart.
    Chart(ChartArgs),
    /// Carbon estimate from energy, PUE and grid intensity.
    Carbon(CarbonArgs),
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Tokenizer directory.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Model file written by `lm-train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ChartFlags {
    #[arg(long)]
    pub log_scale: bool,
    /// none, ascending, descending or key.
    #[arg(long, value_parser = serde_enum::<SortOrder>)]
    pub sort: Option<SortOrder>,
    #[arg(long)]
    pub title: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct PipelineArgs {
    /// Input JSONL documents.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Kept documents, JSONL.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// One decision per input document, JSONL.
    #[arg(long)]
    pub decisions: Option<PathBuf>,
    /// Summary with per-verdict counts.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Run de-duplication after the filters.
    #[arg(long)]
    pub dedup_last: bool,
    #[arg(long)]
    pub no_entropy: bool,
    #[arg(long)]
    pub entropy_low: Option<f64>,
    #[arg(long)]
    pub entropy_high: Option<f64>,
    /// Enable the quality classifier.
    #[arg(long)]
    pub classifier: bool,
    /// Pre-trained classifier; implies --classifier.
    #[arg(long)]
    pub classifier_model: Option<PathBuf>,
    #[arg(long)]
    pub classifier_threshold: Option<f64>,
    #[arg(long)]
    pub no_heuristics: bool,
    #[arg(long)]
    pub min_length: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct TokTrainArgs {
    /// JSONL documents, or plain text with one training text per line.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub strategy: Option<Strategy>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct CodecArgs {
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Defaults to stdin.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LmTrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Model file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<Backend>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub add_k: Option<f64>,
    /// Comma-separated interpolation weights, unigram first.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct PplArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON report; defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Per-language SVG chart.
    #[arg(long)]
    pub chart: Option<PathBuf>,
    /// char or token.
    #[arg(long, value_parser = serde_enum::<Normalization>)]
    pub normalization: Option<Normalization>,
    #[command(flatten)]
    pub chart_flags: ChartFlags,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// JSON report; defaults to stdout, with the table on stderr.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub chart: Option<PathBuf>,
    /// Comma-separated subset of default,case,arithmetic,combined,char.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<Strategy>>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub ngram_order: Option<usize>,
    #[arg(long)]
    pub add_k: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long)]
    pub heldout_modulus: Option<u64>,
    #[command(flatten)]
    pub chart_flags: ChartFlags,
}

#[derive(Debug, Clone, Args)]
pub struct FewShotFlags {
    /// Demonstration pool, same format as the tasks.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub shots: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Prompt template JSON.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Built-in template used when no template file is given.
    #[arg(long, value_enum)]
    pub builtin: Option<BuiltinTemplate>,
    #[arg(long)]
    pub lang: Option<String>,
    /// JSONL of `{"inputs": {...}, "gold": "..."}`.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[command(flatten)]
    pub fewshot: FewShotFlags,
    /// sum or per_token.
    #[arg(long, value_parser = serde_enum::<LossMode>)]
    pub loss_mode: Option<LossMode>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LabelArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSONL of `{"lang", "words", "tags"}`.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[command(flatten)]
    pub fewshot: FewShotFlags,
    #[arg(long, value_enum)]
    pub tagset: Option<TagSetName>,
    /// predicted or gold.
    #[arg(long, value_parser = serde_enum::<PrefixMode>)]
    pub prefix_mode: Option<PrefixMode>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSONL of knowledge triples.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Generation template JSON; defaults to the paraphrase template.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// JSONL of `{"input", "answers"}`.
    #[arg(long)]
    pub tasks: Option<PathBuf>,
    /// Generate once from this prompt instead of evaluating tasks.
    #[arg(long)]
    pub prompt: Option<String>,
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// tapaco, qg or xquad.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub few_shot: bool,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub shots: Option<usize>,
    /// Language used for answer normalisation.
    #[arg(long)]
    pub lang: Option<String>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ChartArgs {
    /// JSON report or flat object of numbers.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// SVG file; defaults to stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// For perplexity reports: plot languages (default) or families.
    #[arg(long)]
    pub families: bool,
    #[command(flatten)]
    pub chart_flags: ChartFlags,
}

#[derive(Debug, Clone, Args)]
pub struct CarbonArgs {
    #[arg(long)]
    pub energy_kwh: Option<f64>,
    #[arg(long)]
    pub gpus: Option<f64>,
    #[arg(long)]
    pub gpu_power_kw: Option<f64>,
    #[arg(long)]
    pub hours: Option<f64>,
    #[arg(long)]
    pub pue: Option<f64>,
    #[arg(long)]
    pub intensity: Option<f64>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

macro_rules! set {
    ($target:expr, $flag:expr) => {
        if let Some(v) = $flag.clone() {
            $target = v.into();
        }
    };
}

impl ModelArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        set!(cfg.paths.tokenizer, self.tokenizer);
        set!(cfg.paths.model, self.model);
    }
}

impl ChartFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        if self.log_scale {
            cfg.chart.log_scale = true;
        }
        set!(cfg.chart.sort, self.sort);
        set!(cfg.chart.title, self.title);
    }
}

impl FewShotFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        set!(cfg.paths.pool, self.pool);
        set!(cfg.eval.shots, self.shots);
        set!(cfg.eval.runs, self.runs);
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pipeline(_) => "pipeline",
            Command::TokTrain(_) => "tok-train",
            Command::TokEncode(_) => "tok-encode",
            Command::TokDecode(_) => "tok-decode",
            Command::LmTrain(_) => "lm-train",
            Command::Ppl(_) => "ppl",
            Command::CompareStrategies(_) => "compare-strategies",
            Command::EvalClassify(_) => "eval-classify",
            Command::EvalLabel(_) => "eval-label",
            Command::Probe(_) => "probe",
            Command::Generate(_) => "generate",
            Command::Stats(_) => "stats",
            Command::Chart(_) => "chart",
            Command::Carbon(_) => "carbon",
        }
    }

    /// Overlays the flags onto `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        let paths = &mut cfg.paths;
        match self {
            Command::Pipeline(a) => {
                set!(paths.corpus, a.corpus);
                set!(paths.output, a.output);
                set!(paths.decisions, a.decisions);
                set!(paths.report, a.report);
                set!(paths.classifier, a.classifier_model);
                let p = &mut cfg.pipeline;
                if a.dedup_last {
                    p.order = StageOrder::DedupLast;
                }
                if a.no_entropy {
                    p.entropy = None;
                } else if a.entropy_low.is_some() || a.entropy_high.is_some() {
                    let band = p.entropy.get_or_insert_with(Default::default);
                    set!(band.low_quantile, a.entropy_low);
                    set!(band.high_quantile, a.entropy_high);
                }
                if a.classifier || a.classifier_model.is_some() || a.classifier_threshold.is_some() {
                    let stage = p.classifier.get_or_insert_with(ClassifierStage::default);
                    set!(stage.threshold, a.classifier_threshold);
                }
                if a.no_heuristics {
                    p.heuristics = None;
                } else if let Some(n) = a.min_length {
                    p.heuristics.get_or_insert_with(Default::default).min_length = n;
                }
            }
            Command::TokTrain(a) => {
                set!(paths.corpus, a.corpus);
                set!(paths.output, a.output);
                set!(paths.report, a.report);
                set!(cfg.tokenizer.strategy, a.strategy);
                set!(cfg.tokenizer.vocab_size, a.vocab_size);
            }
            Command::TokEncode(a) | Command::TokDecode(a) => {
                set!(paths.tokenizer, a.tokenizer);
                set!(paths.input, a.input);
                set!(paths.output, a.output);
            }
            Command::LmTrain(a) => {
                set!(paths.corpus, a.corpus);
                set!(paths.tokenizer, a.tokenizer);
                set!(paths.output, a.output);
                set!(paths.report, a.report);
                set!(cfg.backend, a.backend);
                set!(cfg.ngram.order, a.order);
                set!(cfg.ngram.add_k, a.add_k);
                set!(cfg.ngram.weights, a.weights);
                set!(cfg.transformer.steps, a.steps);
                set!(cfg.transformer.learning_rate, a.learning_rate);
            }
            Command::Ppl(a) => {
                set!(paths.corpus, a.corpus);
                set!(paths.output, a.output);
                set!(paths.chart, a.chart);
                a.model.apply(cfg);
                set!(cfg.perplexity.normalization, a.normalization);
                a.chart_flags.apply(cfg);
            }
            Command::CompareStrategies(a) => {
                set!(paths.corpus, a.corpus);
                set!(paths.output, a.output);
                set!(paths.chart, a.chart);
                set!(cfg.strategies, a.strategies);
                let c = &mut cfg.compare;
                set!(c.vocab_size, a.vocab_size);
                set!(c.ngram_order, a.ngram_order);
                set!(c.add_k, a.add_k);
                set!(c.weights, a.weights);
                set!(c.heldout_modulus, a.heldout_modulus);
                a.chart_flags.apply(cfg);
            }
            Command::EvalClassify(a) => {
                set!(paths.template, a.template);
                set!(paths.tasks, a.tasks);
                set!(paths.output, a.output);
                a.model.apply(cfg);
                a.fewshot.apply(cfg);
                set!(cfg.eval.builtin, a.builtin);
                set!(cfg.eval.lang, a.lang);
                set!(cfg.eval.loss_mode, a.loss_mode);
            }
            Command::EvalLabel(a) => {
                set!(paths.tasks, a.tasks);
                set!(paths.output, a.output);
                a.model.apply(cfg);
                a.fewshot.apply(cfg);
                set!(cfg.eval.tagset, a.tagset);
                set!(cfg.eval.prefix_mode, a.prefix_mode);
            }
            Command::Probe(a) => {
                set!(paths.tasks, a.tasks);
                set!(paths.output, a.output);
                a.model.apply(cfg);
            }
            Command::Generate(a) => {
                set!(paths.template, a.template);
                set!(paths.tasks, a.tasks);
                set!(paths.pool, a.pool);
                set!(paths.output, a.output);
                a.model.apply(cfg);
                let g = &mut cfg.generation;
                set!(g.prompt, a.prompt);
                set!(g.preset, a.preset);
                if a.few_shot {
                    g.few_shot = true;
                }
                let explicit = a.top_p.is_some() || a.top_k.is_some() || a.max_tokens.is_some() || a.shots.is_some();
                if explicit {
                    // Explicit sampling flags start from the preset they refine.
                    if let Ok(base) = g.resolved() {
                        g.settings = base;
                    }
                    g.preset = None;
                }
                set!(g.settings.top_p, a.top_p);
                set!(g.settings.top_k, a.top_k);
                set!(g.settings.max_tokens, a.max_tokens);
                set!(g.settings.num_shots, a.shots);
                set!(cfg.eval.lang, a.lang);
            }
            Command::Stats(a) => {
                set!(paths.corpus, a.corpus);
                set!(paths.output, a.output);
            }
            Command::Chart(a) => {
                set!(paths.input, a.input);
                set!(paths.output, a.output);
                a.chart_flags.apply(cfg);
            }
            Command::Carbon(a) => {
                set!(paths.output, a.output);
                let c = &mut cfg.carbon;
                set!(c.energy_kwh, a.energy_kwh);
                set!(c.gpus, a.gpus);
                set!(c.gpu_power_kw, a.gpu_power_kw);
                set!(c.hours, a.hours);
                set!(c.pue, a.pue);
                set!(c.intensity_kg_per_kwh, a.intensity);
            }
        }
    }

    /// Inputs, outputs and config sections the command depends on.
    pub fn needs(&self, cfg: &RunConfig) -> Needs {
        let p = &cfg.paths;
        let file = |name, path: &Option<PathBuf>| (name, path.clone(), PathKind::File);
        let dir = |name, path: &Option<PathBuf>| (name, path.clone(), PathKind::Dir);
        let model = || vec![dir("tokenizer", &p.tokenizer), file("model", &p.model)];
        let optional = |items: &[(&'static str, &Option<PathBuf>)]| {
            items.iter().filter(|(_, v)| v.is_some()).map(|(n, v)| file(n, v)).collect::<Vec<_>>()
        };
        let mut n = Needs::default();
        match self {
            Command::Pipeline(_) => {
                n.inputs = vec![file("corpus", &p.corpus)];
                n.inputs.extend(optional(&[("classifier", &p.classifier)]));
                n.outputs = vec![("output", p.output.clone())];
                n.optional_outputs = vec![("decisions", p.decisions.clone()), ("report", p.report.clone())];
                n.pipeline = true;
            }
            Command::TokTrain(_) => {
                n.inputs = vec![file("corpus", &p.corpus)];
                n.outputs = vec![("output", p.output.clone())];
                n.optional_outputs = vec![("report", p.report.clone())];
                n.tokenizer_training = true;
            }
            Command::TokEncode(_) | Command::TokDecode(_) => {
                n.inputs = vec![dir("tokenizer", &p.tokenizer)];
                n.inputs.extend(optional(&[("input", &p.input)]));
                n.optional_outputs = vec![("output", p.output.clone())];
            }
            Command::LmTrain(_) => {
                n.inputs = vec![file("corpus", &p.corpus), dir("tokenizer", &p.tokenizer)];
                n.outputs = vec![("output", p.output.clone())];
                n.optional_outputs = vec![("report", p.report.clone())];
                match cfg.backend {
                    Backend::Ngram => n.ngram = true,
                    Backend::Transformer => n.transformer = true,
                }
            }
            Command::Ppl(_) => {
                n.inputs = vec![file("corpus", &p.corpus)];
                n.inputs.extend(model());
                n.optional_outputs = vec![("output", p.output.clone()), ("chart", p.chart.clone())];
                n.chart = true;
            }
            Command::CompareStrategies(_) => {
                n.inputs = vec![file("corpus", &p.corpus)];
                n.optional_outputs = vec![("output", p.output.clone()), ("chart", p.chart.clone())];
                n.compare = true;
                n.chart = true;
            }
            Command::EvalClassify(_) => {
                n.inputs = model();
                n.inputs.push(file("tasks", &p.tasks));
                if cfg.eval.builtin.is_none() || p.template.is_some() {
                    n.inputs.push(file("template", &p.template));
                }
                n.inputs.extend(optional(&[("pool", &p.pool)]));
                n.optional_outputs = vec![("output", p.output.clone())];
                n.eval = true;
            }
            Command::EvalLabel(_) => {
                n.inputs = model();
                n.inputs.push(file("tasks", &p.tasks));
                n.inputs.extend(optional(&[("pool", &p.pool)]));
                n.optional_outputs = vec![("output", p.output.clone())];
                n.eval = true;
            }
            Command::Probe(_) => {
                n.inputs = model();
                n.inputs.push(file("tasks", &p.tasks));
                n.optional_outputs = vec![("output", p.output.clone())];
            }
            Command::Generate(_) => {
                n.inputs = model();
                if cfg.generation.prompt.is_none() {
                    n.inputs.push(file("tasks", &p.tasks));
                }
                n.inputs.extend(optional(&[("template", &p.template), ("pool", &p.pool)]));
                n.optional_outputs = vec![("output", p.output.clone())];
                n.generation = true;
            }
            Command::Stats(_) => {
                n.inputs = vec![file("corpus", &p.corpus)];
                n.optional_outputs = vec![("output", p.output.clone())];
            }
            Command::Chart(_) => {
                n.inputs = vec![file("input", &p.input)];
                n.optional_outputs = vec![("output", p.output.clone())];
                n.chart = true;
            }
            Command::Carbon(_) => {
                n.optional_outputs = vec![("output", p.output.clone())];
                n.carbon = true;
            }
        }
        n
    }
}
