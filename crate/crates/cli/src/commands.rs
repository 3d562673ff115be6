//! One function per subcommand. Each returns the files it read and wrote.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use lmcurate::corpus::{self, compute_stats, run_pipeline, Document, QualityClassifier, Verdict};
use lmcurate::eval::{
    evaluate_classification, evaluate_generation, evaluate_labeling, generate, probe_knowledge,
    FewShotConfig, GenerationExample, GenerationTemplate, KnowledgeTriple, PromptTemplate, TagSet,
    TaggedSentence, TaskExample,
};
use lmcurate::metrics::Articles;
use lmcurate::perplexity::{
    aggregate, char_perplexity, compare_strategies, token_perplexity, DocScore, LanguageRegistry,
    Normalization,
};
use lmcurate::report::{
    carbon_estimate, emit_bar_chart, CarbonInput, ReportedRun, REPORTED_RUNS,
};
use lmcurate::scoring::{NGramModel, ScoringModel, ToyTransformer};
use lmcurate::tokenizer::{train_bbpe, TextTokenizer, TokenizerModel};
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cli::Command;
use crate::config::{Backend, BuiltinTemplate, RunConfig, TagSetName};

#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or arguments; nothing was run.
    Config(Vec<String>),
    Runtime(String),
}

impl From<lmcurate::Error> for Failure {
    fn from(e: lmcurate::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub inputs: Vec<PathBuf>,
    /// Written files; the first one anchors the default manifest path.
    pub outputs: Vec<PathBuf>,
}

/// Wrapper recording provenance inside every JSON report.
#[derive(Serialize)]
struct Envelope<'a, T> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    result: &'a T,
}

struct Ctx<'a> {
    command: &'a str,
    cfg: &'a RunConfig,
    outcome: Outcome,
}

impl Ctx<'_> {
    fn input(&mut self, path: &Path) -> PathBuf {
        self.outcome.inputs.push(path.to_path_buf());
        path.to_path_buf()
    }

    fn read_to_string(&mut self, path: &Path) -> Result<String, Failure> {
        self.input(path);
        fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }

    fn documents(&mut self, path: &Path) -> Result<Vec<Document>, Failure> {
        self.input(path);
        let file = fs::File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        corpus::read_jsonl(BufReader::new(file), None)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }

    fn records<T: DeserializeOwned>(&mut self, path: &Path) -> Result<Vec<T>, Failure> {
        let text = self.read_to_string(path)?;
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(n, l)| {
                serde_json::from_str(l)
                    .map_err(|e| Failure::Runtime(format!("{}:{}: {e}", path.display(), n + 1)))
            })
            .collect()
    }

    fn tokenizer(&mut self) -> Result<TokenizerModel, Failure> {
        let dir = self.cfg.paths.tokenizer.clone().expect("validated");
        self.input(&dir);
        Ok(TokenizerModel::load(&dir)?)
    }

    /// Tokenizer plus scoring model, checked for a shared vocabulary.
    fn scorer(&mut self) -> Result<(TokenizerModel, Box<dyn ScoringModel>), Failure> {
        let tok = self.tokenizer()?;
        let path = self.cfg.paths.model.clone().expect("validated");
        let text = self.read_to_string(&path)?;
        let model = load_model(&text)?;
        if model.vocab_size() != tok.vocab_size() {
            return Err(Failure::Runtime(format!(
                "model vocabulary {} does not match tokenizer vocabulary {}",
                model.vocab_size(),
                tok.vocab_size()
            )));
        }
        Ok((tok, model))
    }

    fn write_bytes(&mut self, path: &Path, bytes: &[u8]) -> Result<(), Failure> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bytes).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        self.outcome.outputs.push(path.to_path_buf());
        Ok(())
    }

    /// Writes to `path`, or stdout when absent.
    fn emit(&mut self, path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
        match path {
            Some(p) => self.write_bytes(p, bytes),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
        }
    }

    fn report_bytes<T: Serialize>(&self, result: &T) -> Vec<u8> {
        let env = Envelope {
            command: self.command,
            seed: self.cfg.seed,
            config_sha256: self.cfg.digest(),
            result,
        };
        let mut text = serde_json::to_string_pretty(&env).expect("report serialises");
        text.push('\n');
        text.into_bytes()
    }

    fn report<T: Serialize>(&mut self, path: Option<&Path>, result: &T) -> Result<(), Failure> {
        let bytes = self.report_bytes(result);
        self.emit(path, &bytes)
    }
}

pub fn load_model(text: &str) -> Result<Box<dyn ScoringModel>, Failure> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Failure::Runtime(format!("model file: {e}")))?;
    if value.get("format").is_some() {
        Ok(Box::new(ToyTransformer::from_json(text)?))
    } else {
        Ok(Box::new(NGramModel::from_json(text)?))
    }
}

pub fn execute(command: &Command, cfg: &RunConfig) -> Result<Outcome, Failure> {
    let mut ctx = Ctx { command: command.name(), cfg, outcome: Outcome::default() };
    match command {
        Command::Pipeline(_) => pipeline(&mut ctx)?,
        Command::TokTrain(_) => tok_train(&mut ctx)?,
        Command::TokEncode(_) => tok_encode(&mut ctx)?,
        Command::TokDecode(_) => tok_decode(&mut ctx)?,
        Command::LmTrain(_) => lm_train(&mut ctx)?,
        Command::Ppl(_) => ppl(&mut ctx)?,
        Command::CompareStrategies(_) => compare(&mut ctx)?,
        Command::EvalClassify(_) => eval_classify(&mut ctx)?,
        Command::EvalLabel(_) => eval_label(&mut ctx)?,
        Command::Probe(_) => probe(&mut ctx)?,
        Command::Generate(_) => generation(&mut ctx)?,
        Command::Stats(_) => stats(&mut ctx)?,
        Command::Chart(a) => chart(&mut ctx, a.families)?,
        Command::Carbon(_) => carbon(&mut ctx)?,
    }
    Ok(ctx.outcome)
}

#[derive(Serialize)]
struct PipelineSummary {
    input_docs: usize,
    kept_docs: usize,
    verdicts: BTreeMap<&'static str, usize>,
    kept_stats: corpus::CorpusStats,
}

fn pipeline(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let paths = &cfg.paths;
    let docs = ctx.documents(paths.corpus.as_deref().expect("validated"))?;
    let classifier = match &paths.classifier {
        Some(p) => Some(QualityClassifier::from_json(&ctx.read_to_string(p)?)?),
        None => None,
    };
    let mut pc = cfg.pipeline.clone();
    pc.workers = cfg.workers;
    let out = run_pipeline(&docs, &pc, classifier.as_ref())?;

    let mut kept = Vec::new();
    corpus::write_jsonl(&mut kept, &out.kept)?;
    ctx.write_bytes(paths.output.as_deref().expect("validated"), &kept)?;
    if let Some(p) = &paths.decisions {
        let mut buf = Vec::new();
        corpus::write_jsonl(&mut buf, &out.decisions)?;
        ctx.write_bytes(p, &buf)?;
    }
    let summary = PipelineSummary {
        input_docs: docs.len(),
        kept_docs: out.kept.len(),
        verdicts: Verdict::ALL.iter().map(|&v| (v.as_str(), out.count(v))).collect(),
        kept_stats: out.stats,
    };
    ctx.report(paths.report.as_deref(), &summary)
}

/// JSONL documents, or one text per non-empty line for any other file.
fn training_texts(ctx: &mut Ctx, path: &Path) -> Result<Vec<String>, Failure> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        Ok(ctx.documents(path)?.into_iter().map(|d| d.text).collect())
    } else {
        Ok(ctx.read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect())
    }
}

#[derive(Serialize)]
struct TokTrainSummary {
    strategy: lmcurate::tokenizer::Strategy,
    requested_vocab_size: usize,
    vocab_size: usize,
    merges: usize,
    training_texts: usize,
}

fn tok_train(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let texts = training_texts(ctx, cfg.paths.corpus.as_deref().expect("validated"))?;
    let t = &cfg.tokenizer;
    let model = train_bbpe(&texts, t.strategy, t.vocab_size)?;
    let dir = cfg.paths.output.as_deref().expect("validated");
    model.save(dir)?;
    ctx.outcome.outputs.push(dir.to_path_buf());
    let summary = TokTrainSummary {
        strategy: t.strategy,
        requested_vocab_size: t.vocab_size,
        vocab_size: model.len(),
        merges: model.merges().len(),
        training_texts: texts.len(),
    };
    ctx.report(cfg.paths.report.as_deref(), &summary)
}

fn read_input(ctx: &mut Ctx) -> Result<Vec<u8>, Failure> {
    match ctx.cfg.paths.input.clone() {
        Some(p) => {
            ctx.input(&p);
            fs::read(&p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))
        }
        None => {
            let mut buf = Vec::new();
            io::stdin().lock().read_to_end(&mut buf)?;
            Ok(buf)
        }
    }
}

/// Ids separated by single spaces, newline-terminated.
fn tok_encode(ctx: &mut Ctx) -> Result<(), Failure> {
    let tok = ctx.tokenizer()?;
    let bytes = read_input(ctx)?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::Runtime("input is not valid UTF-8".into()))?;
    let ids: Vec<String> = tok.encode(&text).iter().map(u32::to_string).collect();
    let mut out = ids.join(" ");
    out.push('\n');
    let path = ctx.cfg.paths.output.clone();
    ctx.emit(path.as_deref(), out.as_bytes())
}

fn tok_decode(ctx: &mut Ctx) -> Result<(), Failure> {
    let tok = ctx.tokenizer()?;
    let bytes = read_input(ctx)?;
    let text = String::from_utf8(bytes).map_err(|_| Failure::Runtime("input is not valid UTF-8".into()))?;
    let ids = text
        .split_ascii_whitespace()
        .map(|s| s.parse::<u32>().map_err(|_| Failure::Runtime(format!("bad token id `{s}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let decoded = tok.decode(&ids)?;
    let path = ctx.cfg.paths.output.clone();
    ctx.emit(path.as_deref(), decoded.as_bytes())
}

#[derive(Serialize)]
struct LmTrainSummary {
    backend: Backend,
    vocab_size: usize,
    documents: usize,
    tokens: usize,
    /// Mean training loss per block of steps (transformer only).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    loss_curve: Vec<f64>,
}

const LOSS_BLOCK: usize = 50;

fn lm_train(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let tok = ctx.tokenizer()?;
    let docs = ctx.documents(cfg.paths.corpus.as_deref().expect("validated"))?;
    let streams: Vec<Vec<u32>> = docs.par_iter().map(|d| tok.encode(&d.text)).collect();
    let v = tok.vocab_size();
    let tokens = streams.iter().map(Vec::len).sum();
    let mut loss_curve = Vec::new();
    let json = match cfg.backend {
        Backend::Ngram => {
            let n = &cfg.ngram;
            NGramModel::train(&streams, v, n.order, n.add_k, &n.weights)?.to_json()?
        }
        Backend::Transformer => {
            let t = &cfg.transformer;
            let usable: Vec<&Vec<u32>> = streams.iter().filter(|s| !s.is_empty()).collect();
            if usable.is_empty() {
                return Err(Failure::Runtime("corpus has no tokens".into()));
            }
            let mut model = ToyTransformer::new(t.model_config(v), cfg.seed)?;
            let mut rng = lmcurate::rng::stream(cfg.seed, 1);
            let bos = model.bos();
            let mut block = Vec::new();
            for _ in 0..t.steps {
                // Same framing as scoring: BOS then up to context - 1 tokens.
                let s = usable[rng.gen_range(0..usable.len())];
                let len = s.len().min(t.context - 1);
                let start = rng.gen_range(0..=s.len() - len);
                let mut ids = Vec::with_capacity(len + 1);
                ids.push(bos);
                ids.extend_from_slice(&s[start..start + len]);
                block.push(model.train_step(&ids, t.learning_rate)?);
                if block.len() == LOSS_BLOCK {
                    loss_curve.push(block.iter().sum::<f64>() / block.len() as f64);
                    block.clear();
                }
            }
            if !block.is_empty() {
                loss_curve.push(block.iter().sum::<f64>() / block.len() as f64);
            }
            model.to_json()?
        }
    };
    ctx.write_bytes(cfg.paths.output.as_deref().expect("validated"), json.as_bytes())?;
    let summary = LmTrainSummary { backend: cfg.backend, vocab_size: v, documents: docs.len(), tokens, loss_curve };
    ctx.report(cfg.paths.report.as_deref(), &summary)
}

fn chart_to(ctx: &mut Ctx, path: &Path, values: &[(String, f64)]) -> Result<(), Failure> {
    let svg = emit_bar_chart(values, &ctx.cfg.chart)?;
    ctx.write_bytes(path, svg.as_bytes())
}

fn ppl(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let docs = ctx.documents(cfg.paths.corpus.as_deref().expect("validated"))?;
    let (tok, model) = ctx.scorer()?;
    let norm = cfg.perplexity.normalization;
    let scores = docs
        .par_iter()
        .map(|d| {
            let perplexity = match norm {
                Normalization::Char => char_perplexity(&*model, &tok, &d.text)?,
                Normalization::Token => token_perplexity(&*model, &tok, &d.text)?,
            };
            Ok(DocScore { doc_id: d.id.clone(), lang: d.lang.clone(), perplexity })
        })
        .collect::<lmcurate::Result<Vec<_>>>()?;
    let label = cfg
        .paths
        .model
        .as_deref()
        .and_then(Path::file_name)
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let report = aggregate(&scores, &LanguageRegistry::builtin(), &label, norm)?;
    ctx.report(cfg.paths.output.as_deref(), &report)?;
    if let Some(path) = &cfg.paths.chart {
        let values: Vec<(String, f64)> = report.languages.iter().map(|(l, s)| (l.clone(), s.perplexity)).collect();
        chart_to(ctx, path, &values)?;
    }
    Ok(())
}

fn compare(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let docs = ctx.documents(cfg.paths.corpus.as_deref().expect("validated"))?;
    let result = compare_strategies(&docs, &cfg.strategies, &cfg.compare, &LanguageRegistry::builtin())?;
    let table = result.render_table();
    ctx.report(cfg.paths.output.as_deref(), &result)?;
    if cfg.paths.output.is_some() {
        print!("{table}");
    } else {
        eprint!("{table}");
    }
    if let Some(path) = &cfg.paths.chart {
        let values: Vec<(String, f64)> =
            result.rows.iter().map(|r| (r.strategy.to_string(), r.char_perplexity)).collect();
        chart_to(ctx, path, &values)?;
    }
    Ok(())
}

fn fewshot(cfg: &RunConfig) -> FewShotConfig {
    FewShotConfig { k: cfg.eval.shots, seed: cfg.seed, num_runs: cfg.eval.runs }
}

fn optional_records<T: DeserializeOwned>(ctx: &mut Ctx, path: Option<&Path>) -> Result<Vec<T>, Failure> {
    match path {
        Some(p) => ctx.records(p),
        None => Ok(Vec::new()),
    }
}

fn eval_classify(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (tok, model) = ctx.scorer()?;
    let template = match (&cfg.paths.template, cfg.eval.builtin) {
        (Some(p), _) => PromptTemplate::from_json(&ctx.read_to_string(p)?)?,
        (None, Some(BuiltinTemplate::Xnli)) => PromptTemplate::xnli(&cfg.eval.lang),
        (None, Some(BuiltinTemplate::Pawsx)) => PromptTemplate::pawsx(&cfg.eval.lang),
        (None, Some(BuiltinTemplate::HateSpeech)) => PromptTemplate::hate_speech(&cfg.eval.lang),
        (None, None) => unreachable!("validated"),
    };
    let examples: Vec<TaskExample> = ctx.records(cfg.paths.tasks.as_deref().expect("validated"))?;
    let pool: Vec<TaskExample> = optional_records(ctx, cfg.paths.pool.as_deref())?;
    let report =
        evaluate_classification(&*model, &tok, &template, &examples, &pool, &fewshot(cfg), cfg.eval.loss_mode)?;
    ctx.report(cfg.paths.output.as_deref(), &report)
}

fn eval_label(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (tok, model) = ctx.scorer()?;
    let sentences: Vec<TaggedSentence> = ctx.records(cfg.paths.tasks.as_deref().expect("validated"))?;
    let pool: Vec<TaggedSentence> = optional_records(ctx, cfg.paths.pool.as_deref())?;
    let tagset = match cfg.eval.tagset {
        TagSetName::Pos => TagSet::pos(),
        TagSetName::Ner => TagSet::ner(),
    };
    let report =
        evaluate_labeling(&*model, &tok, &sentences, &tagset, cfg.eval.prefix_mode, &pool, &fewshot(cfg))?;
    ctx.report(cfg.paths.output.as_deref(), &report)
}

fn probe(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (tok, model) = ctx.scorer()?;
    let triples: Vec<KnowledgeTriple> = ctx.records(cfg.paths.tasks.as_deref().expect("validated"))?;
    let report = probe_knowledge(&*model, &tok, &triples, cfg.seed)?;
    ctx.report(cfg.paths.output.as_deref(), &report)
}

fn generation(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let (tok, model) = ctx.scorer()?;
    let settings = cfg.generation.resolved()?;
    if let Some(prompt) = &cfg.generation.prompt {
        let out = generate(&*model, &tok, prompt, &settings, cfg.seed)?;
        return ctx.report(cfg.paths.output.as_deref(), &out);
    }
    let template = match &cfg.paths.template {
        Some(p) => serde_json::from_str(&ctx.read_to_string(p)?)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?,
        None => GenerationTemplate::tapaco(),
    };
    let examples: Vec<GenerationExample> = ctx.records(cfg.paths.tasks.as_deref().expect("validated"))?;
    let pool: Vec<GenerationExample> = optional_records(ctx, cfg.paths.pool.as_deref())?;
    let articles = Articles::for_language(&cfg.eval.lang);
    let report = evaluate_generation(&*model, &tok, &template, &examples, &pool, &settings, cfg.seed, &articles)?;
    ctx.report(cfg.paths.output.as_deref(), &report)
}

fn stats(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let docs = ctx.documents(cfg.paths.corpus.as_deref().expect("validated"))?;
    let stats = compute_stats(&docs);
    ctx.report(cfg.paths.output.as_deref(), &stats)
}

/// Bars from a strategy comparison, a perplexity report, a corpus stats
/// report, or a flat object of numbers. Report envelopes are unwrapped.
pub fn chart_values(value: &serde_json::Value, families: bool) -> Result<Vec<(String, f64)>, String> {
    let value = value.get("result").unwrap_or(value);
    let number = |v: &serde_json::Value, what: &str| v.as_f64().ok_or_else(|| format!("{what} is not a number"));
    if let Some(rows) = value.get("rows").and_then(|r| r.as_array()) {
        return rows
            .iter()
            .map(|r| {
                let name = r.get("strategy").and_then(|s| s.as_str()).ok_or("row without strategy")?;
                Ok((name.to_string(), number(r.get("char_perplexity").unwrap_or(&serde_json::Value::Null), name)?))
            })
            .collect();
    }
    let section = if families { "families" } else { "languages" };
    if let Some(map) = value.get(section).and_then(|m| m.as_object()) {
        return map
            .iter()
            .map(|(k, v)| {
                let v = v.get("perplexity").unwrap_or(v);
                let v = match v.as_object() {
                    // Corpus stats: total characters over sources.
                    Some(per_source) => per_source
                        .values()
                        .map(|c| c.get("char_count").and_then(|n| n.as_f64()).unwrap_or(0.0))
                        .sum(),
                    None => number(v, k)?,
                };
                Ok((k.clone(), v))
            })
            .collect();
    }
    let map = value.as_object().ok_or("chart input must be a JSON object")?;
    map.iter().map(|(k, v)| Ok((k.clone(), number(v, k)?))).collect()
}

fn chart(ctx: &mut Ctx, families: bool) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let text = ctx.read_to_string(cfg.paths.input.as_deref().expect("validated"))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("chart input: {e}")))?;
    let values = chart_values(&value, families).map_err(Failure::Runtime)?;
    let svg = emit_bar_chart(&values, &cfg.chart)?;
    ctx.emit(cfg.paths.output.as_deref(), svg.as_bytes())
}

#[derive(Serialize)]
struct ReportedEstimate {
    #[serde(flatten)]
    run: ReportedRun,
    gpu_hours: f64,
    implied_gpu_power_kw: f64,
}

#[derive(Serialize)]
struct CarbonReport {
    input: CarbonInput,
    kg_co2: f64,
    /// Published totals with the per-GPU draw they imply under the same PUE
    /// and intensity; the draw is not stated with the totals.
    reported: Vec<ReportedEstimate>,
}

fn carbon(ctx: &mut Ctx) -> Result<(), Failure> {
    let cfg = ctx.cfg;
    let c = &cfg.carbon;
    let input = match c.energy_kwh {
        Some(energy_kwh) => CarbonInput { energy_kwh, pue: c.pue, intensity_kg_per_kwh: c.intensity_kg_per_kwh },
        None => CarbonInput::from_gpus(
            c.gpus.expect("validated"),
            c.gpu_power_kw.expect("validated"),
            c.hours.expect("validated"),
            c.pue,
            c.intensity_kg_per_kwh,
        )?,
    };
    let kg_co2 = carbon_estimate(&input)?;
    let reported = REPORTED_RUNS
        .iter()
        .map(|r| Ok(ReportedEstimate { run: *r, gpu_hours: r.gpu_hours(), implied_gpu_power_kw: r.implied_gpu_power_kw()? }))
        .collect::<lmcurate::Result<Vec<_>>>()?;
    ctx.report(cfg.paths.output.as_deref(), &CarbonReport { input, kg_co2, reported })
}
