//! Run configuration: defaults, TOML file, then command-line flags.

use std::fs;
use std::path::{Path, PathBuf};

use lmcurate::corpus::PipelineConfig;
use lmcurate::eval::{GenerationConfig, LossMode, PrefixMode};
use lmcurate::perplexity::{CompareConfig, Normalization};
use lmcurate::report::{ChartOptions, REPORTED_INTENSITY_KG_PER_KWH, REPORTED_PUE};
use lmcurate::scoring::TransformerConfig;
use lmcurate::tokenizer::{Strategy, DEFAULT_VOCAB_SIZE, SPECIALS};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const CONFIG_ENV: &str = "LMCURATE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 lets the runtime decide. Results do not depend on
    /// it, so it is left out of the serialised form and the digest.
    #[serde(skip_serializing)]
    pub workers: usize,
    /// Scoring model trained by `lm-train`.
    pub backend: Backend,
    /// Strategies compared by `compare-strategies`.
    pub strategies: Vec<Strategy>,
    pub paths: Paths,
    pub pipeline: PipelineConfig,
    pub tokenizer: TokenizerSection,
    pub ngram: NgramSection,
    pub transformer: TransformerSection,
    pub compare: CompareConfig,
    pub perplexity: PerplexitySection,
    pub eval: EvalSection,
    pub generation: GenerationSection,
    pub chart: ChartOptions,
    pub carbon: CarbonSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            workers: 0,
            backend: Backend::Ngram,
            strategies: Strategy::ALL.to_vec(),
            paths: Paths::default(),
            pipeline: PipelineConfig::default(),
            tokenizer: TokenizerSection::default(),
            ngram: NgramSection::default(),
            transformer: TransformerSection::default(),
            compare: CompareConfig::default(),
            perplexity: PerplexitySection::default(),
            eval: EvalSection::default(),
            generation: GenerationSection::default(),
            chart: ChartOptions::default(),
            carbon: CarbonSection::default(),
        }
    }
}

/// Relative paths in a config file are resolved against the file's directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// JSONL documents.
    pub corpus: Option<PathBuf>,
    /// Raw input file for encode, decode and chart.
    pub input: Option<PathBuf>,
    /// Tokenizer directory.
    pub tokenizer: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub classifier: Option<PathBuf>,
    pub template: Option<PathBuf>,
    pub tasks: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Summary report for commands whose main output is data.
    pub report: Option<PathBuf>,
    pub decisions: Option<PathBuf>,
    pub chart: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
}

impl Paths {
    fn rebase(&mut self, base: &Path) {
        for p in [
            &mut self.corpus,
            &mut self.input,
            &mut self.tokenizer,
            &mut self.model,
            &mut self.classifier,
            &mut self.template,
            &mut self.tasks,
            &mut self.pool,
            &mut self.output,
            &mut self.report,
            &mut self.decisions,
            &mut self.chart,
            &mut self.manifest,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizerSection {
    pub strategy: Strategy,
    pub vocab_size: usize,
}

impl Default for TokenizerSection {
    fn default() -> Self {
        Self { strategy: Strategy::Default, vocab_size: DEFAULT_VOCAB_SIZE }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NgramSection {
    pub order: usize,
    pub add_k: f64,
    pub weights: Vec<f64>,
}

impl Default for NgramSection {
    fn default() -> Self {
        Self { order: 3, add_k: 0.01, weights: vec![0.1, 0.3, 0.6] }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Ngram,
    Transformer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformerSection {
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub context: usize,
    pub window: usize,
    pub d_ff: usize,
    pub init_std: f64,
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for TransformerSection {
    fn default() -> Self {
        Self {
            d_model: 16,
            n_heads: 2,
            n_layers: 2,
            context: 32,
            window: 8,
            d_ff: 64,
            init_std: 0.1,
            steps: 200,
            learning_rate: 0.05,
        }
    }
}

impl TransformerSection {
    pub fn model_config(&self, vocab_size: usize) -> TransformerConfig {
        TransformerConfig {
            vocab_size,
            d_model: self.d_model,
            n_heads: self.n_heads,
            n_layers: self.n_layers,
            context: self.context,
            window: self.window,
            d_ff: self.d_ff,
            init_std: self.init_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerplexitySection {
    pub normalization: Normalization,
}

impl Default for PerplexitySection {
    fn default() -> Self {
        Self { normalization: Normalization::Char }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub shots: usize,
    pub runs: usize,
    pub loss_mode: LossMode,
    pub prefix_mode: PrefixMode,
    pub tagset: TagSetName,
    /// Task for a builtin classification template when no template file is given.
    pub builtin: Option<BuiltinTemplate>,
    pub lang: String,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            shots: 0,
            runs: 1,
            loss_mode: LossMode::Sum,
            prefix_mode: PrefixMode::Predicted,
            tagset: TagSetName::Pos,
            builtin: None,
            lang: "en".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TagSetName {
    #[default]
    Pos,
    Ner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinTemplate {
    Xnli,
    Pawsx,
    HateSpeech,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationSection {
    /// Published settings for `tapaco`, `qg` or `xquad`; explicit fields below
    /// are ignored when a preset is chosen.
    pub preset: Option<String>,
    pub few_shot: bool,
    pub settings: GenerationConfig,
    /// Generate from this prompt instead of a task file.
    pub prompt: Option<String>,
}

impl GenerationSection {
    pub fn resolved(&self) -> lmcurate::Result<GenerationConfig> {
        match &self.preset {
            Some(task) => GenerationConfig::preset(task, self.few_shot),
            None => Ok(self.settings.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarbonSection {
    pub energy_kwh: Option<f64>,
    pub gpus: Option<f64>,
    pub gpu_power_kw: Option<f64>,
    pub hours: Option<f64>,
    pub pue: f64,
    pub intensity_kg_per_kwh: f64,
}

impl Default for CarbonSection {
    fn default() -> Self {
        Self {
            energy_kwh: None,
            gpus: None,
            gpu_power_kw: None,
            hours: None,
            pue: REPORTED_PUE,
            intensity_kg_per_kwh: REPORTED_INTENSITY_KG_PER_KWH,
        }
    }
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, Vec<String>> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| vec![format!("cannot read config {}: {e}", path.display())])?;
    let mut cfg: RunConfig = toml::from_str(&text)
        .map_err(|e| vec![format!("config {}: {}", path.display(), e.message())])?;
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    cfg.paths.rebase(base);
    Ok(cfg)
}

impl RunConfig {
    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex(&Sha256::digest(json))
    }

    /// Checks every section a command depends on and returns all problems.
    pub fn validate(&self, needs: &Needs) -> Vec<String> {
        let mut errors = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errors.push(msg);
            }
        };

        for (name, path, kind) in &needs.inputs {
            match path {
                None => check(false, format!("paths.{name} is required")),
                Some(p) => {
                    let exists = match kind {
                        PathKind::File => p.is_file(),
                        PathKind::Dir => p.is_dir(),
                    };
                    check(exists, format!("paths.{name}: {} does not exist", p.display()));
                }
            }
        }
        for (name, path) in &needs.outputs {
            check(path.is_some(), format!("paths.{name} is required"));
        }
        for (out_name, out) in needs.all_outputs() {
            for (in_name, input, _) in &needs.inputs {
                if let (Some(o), Some(i)) = (out, input) {
                    check(!same_path(o, i), format!("paths.{out_name} would overwrite paths.{in_name}"));
                }
            }
        }

        if needs.tokenizer_training {
            let t = &self.tokenizer;
            let min = if t.strategy.is_byte_level() { 256 + SPECIALS.len() } else { SPECIALS.len() + 1 };
            check(t.vocab_size >= min, format!("tokenizer.vocab_size {} is below {min}", t.vocab_size));
        }
        if needs.ngram {
            let n = &self.ngram;
            check(n.order >= 1, "ngram.order must be at least 1".into());
            check(n.add_k > 0.0 && n.add_k.is_finite(), format!("ngram.add_k must be positive, got {}", n.add_k));
            check(
                weights_ok(&n.weights, n.order),
                format!("ngram.weights must be {} non-negative values summing to 1", n.order),
            );
        }
        if needs.transformer {
            if let Err(e) = self.transformer.model_config(1).validate() {
                check(false, format!("transformer: {e}"));
            }
            check(self.transformer.context >= 2, "transformer.context must be at least 2".into());
            check(
                self.transformer.learning_rate > 0.0 && self.transformer.learning_rate.is_finite(),
                "transformer.learning_rate must be positive".into(),
            );
        }
        if needs.compare {
            let c = &self.compare;
            check(c.vocab_size >= 256 + SPECIALS.len(), format!("compare.vocab_size {} is below {}", c.vocab_size, 256 + SPECIALS.len()));
            check(c.ngram_order >= 1, "compare.ngram_order must be at least 1".into());
            check(c.add_k > 0.0 && c.add_k.is_finite(), "compare.add_k must be positive".into());
            check(
                weights_ok(&c.weights, c.ngram_order),
                format!("compare.weights must be {} non-negative values summing to 1", c.ngram_order),
            );
            check(c.heldout_modulus >= 2, "compare.heldout_modulus must be at least 2".into());
        }
        if needs.pipeline {
            let p = &self.pipeline;
            if let Some(band) = &p.entropy {
                check(
                    (0.0..=1.0).contains(&band.low_quantile)
                        && (0.0..=1.0).contains(&band.high_quantile)
                        && band.low_quantile < band.high_quantile,
                    format!(
                        "pipeline.entropy needs 0 <= low_quantile < high_quantile <= 1, got ({}, {})",
                        band.low_quantile, band.high_quantile
                    ),
                );
            }
            if let Some(c) = &p.classifier {
                check((0.0..=1.0).contains(&c.threshold), "pipeline.classifier.threshold must lie in [0, 1]".into());
            }
            if let Some(h) = &p.heuristics {
                check(
                    (0.0..=1.0).contains(&h.max_digit_fraction)
                        && (0.0..=1.0).contains(&h.max_repeated_line_fraction),
                    "pipeline.heuristics fractions must lie in [0, 1]".into(),
                );
                check(h.max_mean_word_length > 0.0, "pipeline.heuristics.max_mean_word_length must be positive".into());
            }
            check(!p.filter_sources.is_empty(), "pipeline.filter_sources must not be empty".into());
        }
        if needs.eval {
            check(self.eval.runs >= 1, "eval.runs must be at least 1".into());
            check(self.eval.shots == 0 || self.paths.pool.is_some(), "eval.shots > 0 needs paths.pool".into());
        }
        if needs.generation {
            match self.generation.resolved() {
                Ok(g) => {
                    if let Err(e) = g.validate() {
                        check(false, format!("generation: {e}"));
                    }
                    check(g.num_shots == 0 || self.paths.pool.is_some(), "generation shots > 0 needs paths.pool".into());
                }
                Err(e) => check(false, format!("generation: {e}")),
            }
        }
        if needs.compare {
            check(!self.strategies.is_empty(), "strategies must not be empty".into());
        }
        if needs.chart {
            check(self.chart.width > 0.0 && self.chart.width.is_finite(), "chart.width must be positive".into());
        }
        if needs.carbon {
            let c = &self.carbon;
            let from_gpus = [c.gpus, c.gpu_power_kw, c.hours];
            check(
                c.energy_kwh.is_some() || from_gpus.iter().all(Option::is_some),
                "carbon needs energy_kwh or all of gpus, gpu_power_kw and hours".into(),
            );
            for (name, v) in [
                ("energy_kwh", c.energy_kwh),
                ("gpus", c.gpus),
                ("gpu_power_kw", c.gpu_power_kw),
                ("hours", c.hours),
                ("pue", Some(c.pue)),
                ("intensity_kg_per_kwh", Some(c.intensity_kg_per_kwh)),
            ] {
                if let Some(v) = v {
                    check(v >= 0.0 && v.is_finite(), format!("carbon.{name} must be finite and non-negative"));
                }
            }
        }
        errors
    }
}

fn weights_ok(w: &[f64], order: usize) -> bool {
    w.len() == order
        && w.iter().all(|x| *x >= 0.0 && x.is_finite())
        && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-9
}

fn same_path(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Copy)]
pub enum PathKind {
    File,
    Dir,
}

/// What a command reads and which config sections it uses.
#[derive(Debug, Default)]
pub struct Needs {
    pub inputs: Vec<(&'static str, Option<PathBuf>, PathKind)>,
    pub outputs: Vec<(&'static str, Option<PathBuf>)>,
    pub optional_outputs: Vec<(&'static str, Option<PathBuf>)>,
    pub pipeline: bool,
    pub tokenizer_training: bool,
    pub ngram: bool,
    pub transformer: bool,
    pub compare: bool,
    pub eval: bool,
    pub generation: bool,
    pub chart: bool,
    pub carbon: bool,
}

impl Needs {
    fn all_outputs(&self) -> impl Iterator<Item = (&'static str, &Option<PathBuf>)> {
        self.outputs.iter().chain(&self.optional_outputs).map(|(n, p)| (*n, p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_for_every_section() {
        let needs = Needs {
            pipeline: true,
            tokenizer_training: true,
            ngram: true,
            transformer: true,
            compare: true,
            eval: true,
            generation: true,
            chart: true,
            ..Needs::default()
        };
        assert_eq!(RunConfig::default().validate(&needs), Vec::<String>::new());
    }

    #[test]
    fn toml_roundtrip_and_unknown_keys() {
        let cfg: RunConfig = toml::from_str("seed = 7\n[ngram]\norder = 2\nweights = [0.5, 0.5]\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.ngram.order, 2);
        assert_eq!(cfg.ngram.add_k, 0.01);
        assert!(toml::from_str::<RunConfig>("sede = 7\n").is_err());
    }

    #[test]
    fn all_errors_are_collected() {
        let mut cfg = RunConfig::default();
        cfg.ngram.weights = vec![1.0];
        cfg.tokenizer.vocab_size = 10;
        let needs = Needs {
            inputs: vec![("corpus", None, PathKind::File)],
            outputs: vec![("output", None)],
            ngram: true,
            tokenizer_training: true,
            ..Needs::default()
        };
        assert_eq!(cfg.validate(&needs).len(), 4);
    }

    #[test]
    fn digest_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.workers = 8;
        assert_eq!(a.digest(), b.digest());
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
