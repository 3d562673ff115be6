//! Toy decoder-only transformer with alternating dense and banded attention.
//!
//! Pre-layer-norm blocks, learned positional embeddings, tanh-approximated
//! GELU, untied output head. All parameters live in one flat `Vec<f64>`
//! addressed through a fixed layout so gradients, SGD and checkpoints are
//! plain slice operations. The token embedding has one extra row, id
//! `vocab_size`, used as the beginning-of-sequence token when scoring.

use std::ops::Range;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_id, ScoringModel};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AttentionKind {
    Dense,
    Banded { window: usize },
}

impl AttentionKind {
    /// Whether query `i` may attend to key `j`.
    pub fn allows(self, i: usize, j: usize) -> bool {
        match self {
            AttentionKind::Dense => j <= i,
            AttentionKind::Banded { window } => j <= i && i - j < window,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_layers: usize,
    pub context: usize,
    pub window: usize,
    pub d_ff: usize,
    pub init_std: f64,
}

impl TransformerConfig {
    /// d=8, two heads, two layers, context 16, window 8.
    pub fn tiny(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            context: 16,
            window: 8,
            d_ff: 32,
            init_std: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("n_layers", self.n_layers),
            ("context", self.context),
            ("window", self.window),
            ("d_ff", self.d_ff),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidArgument(format!(
                "d_model {} not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::InvalidArgument("init_std must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Even layers are dense, odd layers banded.
    pub fn layer_kind(&self, layer: usize) -> AttentionKind {
        if layer.is_multiple_of(2) {
            AttentionKind::Dense
        } else {
            AttentionKind::Banded { window: self.window }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct LayerOffsets {
    ln1_g: usize,
    ln1_b: usize,
    wq: usize,
    bq: usize,
    wk: usize,
    bk: usize,
    wv: usize,
    bv: usize,
    wo: usize,
    bo: usize,
    ln2_g: usize,
    ln2_b: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    tok: usize,
    pos: usize,
    layers: Vec<LayerOffsets>,
    lnf_g: usize,
    lnf_b: usize,
    w_out: usize,
    b_out: usize,
    total: usize,
    groups: Vec<(String, Range<usize>)>,
}

impl Layout {
    fn new(c: &TransformerConfig) -> Self {
        let (v, d, f) = (c.vocab_size, c.d_model, c.d_ff);
        let mut groups = Vec::new();
        let mut next = 0;
        let mut alloc = |name: String, len: usize| {
            let start = next;
            next += len;
            groups.push((name, start..next));
            start
        };
        let tok = alloc("tok_emb".into(), (v + 1) * d);
        let pos = alloc("pos_emb".into(), c.context * d);
        let layers = (0..c.n_layers)
            .map(|l| LayerOffsets {
                ln1_g: alloc(format!("layer{l}.ln1.g"), d),
                ln1_b: alloc(format!("layer{l}.ln1.b"), d),
                wq: alloc(format!("layer{l}.wq"), d * d),
                bq: alloc(format!("layer{l}.bq"), d),
                wk: alloc(format!("layer{l}.wk"), d * d),
                bk: alloc(format!("layer{l}.bk"), d),
                wv: alloc(format!("layer{l}.wv"), d * d),
                bv: alloc(format!("layer{l}.bv"), d),
                wo: alloc(format!("layer{l}.wo"), d * d),
                bo: alloc(format!("layer{l}.bo"), d),
                ln2_g: alloc(format!("layer{l}.ln2.g"), d),
                ln2_b: alloc(format!("layer{l}.ln2.b"), d),
                w1: alloc(format!("layer{l}.w1"), d * f),
                b1: alloc(format!("layer{l}.b1"), f),
                w2: alloc(format!("layer{l}.w2"), f * d),
                b2: alloc(format!("layer{l}.b2"), d),
            })
            .collect();
        let lnf_g = alloc("lnf.g".into(), d);
        let lnf_b = alloc("lnf.b".into(), d);
        let w_out = alloc("w_out".into(), d * v);
        let b_out = alloc("b_out".into(), v);
        Self { tok, pos, layers, lnf_g, lnf_b, w_out, b_out, total: next, groups }
    }
}

/// Gradient of the loss with respect to every parameter, same layout as the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Attention probabilities from a forward pass: `[layer][head]` → `n × n`
/// row-major matrix with zeros at masked positions.
#[derive(Debug, Clone)]
pub struct TransformerTrace {
    pub attention: Vec<Vec<Vec<f64>>>,
    pub len: usize,
}

impl TransformerTrace {
    pub fn row(&self, layer: usize, head: usize, i: usize) -> &[f64] {
        &self.attention[layer][head][i * self.len..(i + 1) * self.len]
    }
}

#[derive(Debug, Clone)]
pub struct ToyTransformer {
    config: TransformerConfig,
    layout: Layout,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    config: TransformerConfig,
    params: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "toy-transformer/1";

struct LayerCache {
    ln1: Norm,
    a: Vec<f64>,
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
    probs: Vec<Vec<f64>>,
    o: Vec<f64>,
    ln2: Norm,
    b: Vec<f64>,
    h_pre: Vec<f64>,
    h_act: Vec<f64>,
}

struct Cache {
    n: usize,
    layers: Vec<LayerCache>,
    lnf: Norm,
    z: Vec<f64>,
}

struct Norm {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

impl ToyTransformer {
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = crate::rng::seeded(seed);
        let normal = Normal::new(0.0, config.init_std)
            .map_err(|e| Error::InvalidArgument(format!("init_std: {e}")))?;
        for (name, range) in &layout.groups {
            let leaf = name.rsplit('.').next().unwrap_or(name);
            let is_gain = leaf == "g";
            let is_bias = leaf.starts_with('b');
            for p in &mut params[range.clone()] {
                *p = if is_gain {
                    1.0
                } else if is_bias {
                    0.0
                } else {
                    normal.sample(&mut rng)
                };
            }
        }
        Ok(Self { config, layout, params })
    }

    pub fn config(&self) -> &TransformerConfig {
        &self.config
    }

    /// Token id used as the beginning-of-sequence marker.
    pub fn bos(&self) -> u32 {
        self.config.vocab_size as u32
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Named parameter tensors and their ranges in [`Self::params`].
    pub fn parameter_groups(&self) -> &[(String, Range<usize>)] {
        &self.layout.groups
    }

    /// Zeroes the output projection so every position predicts uniformly.
    pub fn zero_output_head(&mut self) {
        let (v, d) = (self.config.vocab_size, self.config.d_model);
        self.params[self.layout.w_out..self.layout.w_out + d * v].fill(0.0);
        self.params[self.layout.b_out..self.layout.b_out + v].fill(0.0);
    }

    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if grads.values.len() != self.params.len() {
            return Err(Error::LengthMismatch { left: grads.values.len(), right: self.params.len() });
        }
        for (p, g) in self.params.iter_mut().zip(&grads.values) {
            *p -= learning_rate * g;
        }
        Ok(())
    }

    /// One SGD step on `ids`; returns the loss before the update.
    pub fn train_step(&mut self, ids: &[u32], learning_rate: f64) -> Result<f64> {
        let (loss, grads) = self.loss_and_grad(ids)?;
        self.sgd_step(&grads, learning_rate)?;
        Ok(loss)
    }

    /// Logits, `|ids| × vocab_size` row-major.
    pub fn forward(&self, ids: &[u32]) -> Result<Vec<f64>> {
        self.check_input(ids)?;
        let (logits, _) = self.forward_cached(ids);
        Ok(logits)
    }

    pub fn forward_with_trace(&self, ids: &[u32]) -> Result<(Vec<f64>, TransformerTrace)> {
        self.check_input(ids)?;
        let (logits, cache) = self.forward_cached(ids);
        let attention = cache.layers.into_iter().map(|l| l.probs).collect();
        Ok((logits, TransformerTrace { attention, len: ids.len() }))
    }

    /// Mean cross-entropy of predicting `ids[t + 1]` from `ids[..=t]`, and its gradient.
    pub fn loss_and_grad(&self, ids: &[u32]) -> Result<(f64, Gradients)> {
        self.check_input(ids)?;
        if ids.len() < 2 {
            return Err(Error::InvalidArgument("loss needs at least two tokens".into()));
        }
        for &t in &ids[1..] {
            check_id(t, self.config.vocab_size)?;
        }
        let (logits, cache) = self.forward_cached(ids);
        let v = self.config.vocab_size;
        let n = ids.len();
        let steps = (n - 1) as f64;
        let mut loss = 0.0;
        let mut d_logits = vec![0.0; n * v];
        for t in 0..n - 1 {
            let row = &logits[t * v..(t + 1) * v];
            let probs = softmax(row);
            let target = ids[t + 1] as usize;
            loss += log_sum_exp(row) - row[target];
            for (j, p) in probs.iter().enumerate() {
                d_logits[t * v + j] = (p - if j == target { 1.0 } else { 0.0 }) / steps;
            }
        }
        let grads = self.backward(ids, &cache, &d_logits);
        Ok((loss / steps, Gradients { values: grads }))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config: self.config.clone(),
            params: self.params.clone(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::parse("checkpoint", format!("unsupported format `{}`", ck.format)));
        }
        ck.config.validate()?;
        let layout = Layout::new(&ck.config);
        if ck.params.len() != layout.total {
            return Err(Error::parse(
                "checkpoint",
                format!("expected {} parameters, found {}", layout.total, ck.params.len()),
            ));
        }
        Ok(Self { config: ck.config, layout, params: ck.params })
    }

    fn check_input(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() {
            return Err(Error::EmptyInput("token sequence"));
        }
        if ids.len() > self.config.context {
            return Err(Error::SequenceTooLong { len: ids.len(), max: self.config.context });
        }
        for &id in ids {
            check_id(id, self.config.vocab_size + 1)?;
        }
        Ok(())
    }

    fn forward_cached(&self, ids: &[u32]) -> (Vec<f64>, Cache) {
        let c = &self.config;
        let p = &self.params;
        let (d, f, h) = (c.d_model, c.d_ff, c.n_heads);
        let dh = d / h;
        let scale = 1.0 / (dh as f64).sqrt();
        let n = ids.len();

        let mut x = vec![0.0; n * d];
        for (t, &id) in ids.iter().enumerate() {
            let tok = &p[self.layout.tok + id as usize * d..][..d];
            let pos = &p[self.layout.pos + t * d..][..d];
            for i in 0..d {
                x[t * d + i] = tok[i] + pos[i];
            }
        }

        let mut layers = Vec::with_capacity(c.n_layers);
        for (l, off) in self.layout.layers.iter().enumerate() {
            let kind = c.layer_kind(l);
            let (a, ln1) = layer_norm(&x, n, d, &p[off.ln1_g..][..d], &p[off.ln1_b..][..d]);
            let q = linear(&a, n, d, &p[off.wq..][..d * d], &p[off.bq..][..d], d);
            let k = linear(&a, n, d, &p[off.wk..][..d * d], &p[off.bk..][..d], d);
            let v = linear(&a, n, d, &p[off.wv..][..d * d], &p[off.bv..][..d], d);

            let mut o = vec![0.0; n * d];
            let mut probs = Vec::with_capacity(h);
            for head in 0..h {
                let cols = head * dh..(head + 1) * dh;
                let mut pm = vec![0.0; n * n];
                for i in 0..n {
                    let qi = &q[i * d + cols.start..i * d + cols.end];
                    let mut max = f64::NEG_INFINITY;
                    for j in 0..n {
                        if kind.allows(i, j) {
                            let kj = &k[j * d + cols.start..j * d + cols.end];
                            let s = dot(qi, kj) * scale;
                            pm[i * n + j] = s;
                            max = max.max(s);
                        }
                    }
                    let mut sum = 0.0;
                    for j in 0..n {
                        if kind.allows(i, j) {
                            let e = (pm[i * n + j] - max).exp();
                            pm[i * n + j] = e;
                            sum += e;
                        }
                    }
                    for j in 0..n {
                        if kind.allows(i, j) {
                            pm[i * n + j] /= sum;
                            let w = pm[i * n + j];
                            for (m, col) in cols.clone().enumerate() {
                                o[i * d + col] += w * v[j * d + cols.start + m];
                            }
                        }
                    }
                }
                probs.push(pm);
            }

            let attn = linear(&o, n, d, &p[off.wo..][..d * d], &p[off.bo..][..d], d);
            for (xi, ai) in x.iter_mut().zip(&attn) {
                *xi += ai;
            }
            let (b, ln2) = layer_norm(&x, n, d, &p[off.ln2_g..][..d], &p[off.ln2_b..][..d]);
            let h_pre = linear(&b, n, d, &p[off.w1..][..d * f], &p[off.b1..][..f], f);
            let h_act: Vec<f64> = h_pre.iter().map(|&u| gelu(u)).collect();
            let m = linear(&h_act, n, f, &p[off.w2..][..f * d], &p[off.b2..][..d], d);
            for (xi, mi) in x.iter_mut().zip(&m) {
                *xi += mi;
            }
            layers.push(LayerCache { ln1, a, q, k, v, probs, o, ln2, b, h_pre, h_act });
        }

        let (z, lnf) =
            layer_norm(&x, n, d, &p[self.layout.lnf_g..][..d], &p[self.layout.lnf_b..][..d]);
        let vs = c.vocab_size;
        let logits = linear(&z, n, d, &p[self.layout.w_out..][..d * vs], &p[self.layout.b_out..][..vs], vs);
        (logits, Cache { n, layers, lnf, z })
    }

    fn backward(&self, ids: &[u32], cache: &Cache, d_logits: &[f64]) -> Vec<f64> {
        let c = &self.config;
        let p = &self.params;
        let lay = &self.layout;
        let (d, f, h, vs) = (c.d_model, c.d_ff, c.n_heads, c.vocab_size);
        let dh = d / h;
        let scale = 1.0 / (dh as f64).sqrt();
        let n = cache.n;
        let mut g = vec![0.0; p.len()];

        let dz = linear_backward(
            &cache.z, n, d, &p[lay.w_out..][..d * vs], vs, d_logits, &mut g, lay.w_out, lay.b_out,
        );
        let mut dx = layer_norm_backward(&dz, n, d, &cache.lnf, &p[lay.lnf_g..][..d], &mut g, lay.lnf_g, lay.lnf_b);

        for (l, off) in lay.layers.iter().enumerate().rev() {
            let lc = &cache.layers[l];
            let kind = c.layer_kind(l);

            // MLP branch: x = x_mid + W2 gelu(W1 LN2(x_mid)).
            let dh_act = linear_backward(&lc.h_act, n, f, &p[off.w2..][..f * d], d, &dx, &mut g, off.w2, off.b2);
            let dh_pre: Vec<f64> =
                dh_act.iter().zip(&lc.h_pre).map(|(gv, &u)| gv * gelu_grad(u)).collect();
            let db = linear_backward(&lc.b, n, d, &p[off.w1..][..d * f], f, &dh_pre, &mut g, off.w1, off.b1);
            let dmid = layer_norm_backward(&db, n, d, &lc.ln2, &p[off.ln2_g..][..d], &mut g, off.ln2_g, off.ln2_b);
            for (a, b) in dx.iter_mut().zip(&dmid) {
                *a += b;
            }

            // Attention branch: x_mid = x_in + Wo attn(LN1(x_in)).
            let d_o = linear_backward(&lc.o, n, d, &p[off.wo..][..d * d], d, &dx, &mut g, off.wo, off.bo);
            let mut dq = vec![0.0; n * d];
            let mut dk = vec![0.0; n * d];
            let mut dv = vec![0.0; n * d];
            for head in 0..h {
                let c0 = head * dh;
                let pm = &lc.probs[head];
                for i in 0..n {
                    let doi = &d_o[i * d + c0..i * d + c0 + dh];
                    let mut dp = vec![0.0; n];
                    let mut weighted = 0.0;
                    for j in 0..n {
                        if kind.allows(i, j) {
                            let pij = pm[i * n + j];
                            dp[j] = dot(doi, &lc.v[j * d + c0..j * d + c0 + dh]);
                            weighted += pij * dp[j];
                            for m in 0..dh {
                                dv[j * d + c0 + m] += pij * doi[m];
                            }
                        }
                    }
                    for j in 0..n {
                        if kind.allows(i, j) {
                            let ds = pm[i * n + j] * (dp[j] - weighted) * scale;
                            for m in 0..dh {
                                dq[i * d + c0 + m] += ds * lc.k[j * d + c0 + m];
                                dk[j * d + c0 + m] += ds * lc.q[i * d + c0 + m];
                            }
                        }
                    }
                }
            }
            let mut da = linear_backward(&lc.a, n, d, &p[off.wq..][..d * d], d, &dq, &mut g, off.wq, off.bq);
            let da_k = linear_backward(&lc.a, n, d, &p[off.wk..][..d * d], d, &dk, &mut g, off.wk, off.bk);
            let da_v = linear_backward(&lc.a, n, d, &p[off.wv..][..d * d], d, &dv, &mut g, off.wv, off.bv);
            for i in 0..da.len() {
                da[i] += da_k[i] + da_v[i];
            }
            let din = layer_norm_backward(&da, n, d, &lc.ln1, &p[off.ln1_g..][..d], &mut g, off.ln1_g, off.ln1_b);
            for (a, b) in dx.iter_mut().zip(&din) {
                *a += b;
            }
        }

        for (t, &id) in ids.iter().enumerate() {
            for i in 0..d {
                g[lay.tok + id as usize * d + i] += dx[t * d + i];
                g[lay.pos + t * d + i] += dx[t * d + i];
            }
        }
        g
    }

    /// Model input for scoring `context`: BOS then the most recent tokens.
    fn scoring_input(&self, context: &[u32]) -> Result<Vec<u32>> {
        for &id in context {
            check_id(id, self.config.vocab_size)?;
        }
        let keep = context.len().min(self.config.context - 1);
        let mut seq = Vec::with_capacity(keep + 1);
        seq.push(self.bos());
        seq.extend_from_slice(&context[context.len() - keep..]);
        Ok(seq)
    }
}

impl ScoringModel for ToyTransformer {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_context(&self) -> Option<usize> {
        Some(self.config.context - 1)
    }

    fn distribution(&self, context: &[u32]) -> Result<Vec<f64>> {
        let seq = self.scoring_input(context)?;
        let logits = self.forward(&seq)?;
        let v = self.config.vocab_size;
        Ok(softmax(&logits[(seq.len() - 1) * v..]))
    }

    fn log_prob(&self, context: &[u32], next: u32) -> Result<f64> {
        check_id(next, self.config.vocab_size)?;
        let seq = self.scoring_input(context)?;
        let logits = self.forward(&seq)?;
        let v = self.config.vocab_size;
        let row = &logits[(seq.len() - 1) * v..];
        Ok(row[next as usize] - log_sum_exp(row))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    let s = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (s * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let s = (2.0 / std::f64::consts::PI).sqrt();
    let t = (s * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * s * (1.0 + 3.0 * GELU_C * x * x)
}

/// `y = x W + b` for `n` rows; `W` is `din × dout` row-major.
fn linear(x: &[f64], n: usize, din: usize, w: &[f64], b: &[f64], dout: usize) -> Vec<f64> {
    let mut y = vec![0.0; n * dout];
    for t in 0..n {
        let row = &mut y[t * dout..(t + 1) * dout];
        row.copy_from_slice(b);
        for i in 0..din {
            let xi = x[t * din + i];
            for (r, wv) in row.iter_mut().zip(&w[i * dout..(i + 1) * dout]) {
                *r += xi * wv;
            }
        }
    }
    y
}

/// Accumulates dW and db into `g` and returns dx.
#[allow(clippy::too_many_arguments)]
fn linear_backward(
    x: &[f64],
    n: usize,
    din: usize,
    w: &[f64],
    dout: usize,
    dy: &[f64],
    g: &mut [f64],
    w_off: usize,
    b_off: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; n * din];
    for t in 0..n {
        let dyr = &dy[t * dout..(t + 1) * dout];
        for (o, dv) in dyr.iter().enumerate() {
            g[b_off + o] += dv;
        }
        for i in 0..din {
            let xi = x[t * din + i];
            let wrow = &w[i * dout..(i + 1) * dout];
            let grow = &mut g[w_off + i * dout..w_off + (i + 1) * dout];
            let mut acc = 0.0;
            for o in 0..dout {
                grow[o] += xi * dyr[o];
                acc += wrow[o] * dyr[o];
            }
            dx[t * din + i] = acc;
        }
    }
    dx
}

fn layer_norm(x: &[f64], n: usize, d: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, Norm) {
    let mut y = vec![0.0; n * d];
    let mut xhat = vec![0.0; n * d];
    let mut inv_std = vec![0.0; n];
    for t in 0..n {
        let row = &x[t * d..(t + 1) * d];
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv = 1.0 / (var + LN_EPS).sqrt();
        inv_std[t] = inv;
        for i in 0..d {
            let xh = (row[i] - mean) * inv;
            xhat[t * d + i] = xh;
            y[t * d + i] = gain[i] * xh + bias[i];
        }
    }
    (y, Norm { xhat, inv_std })
}

#[allow(clippy::too_many_arguments)]
fn layer_norm_backward(
    dy: &[f64],
    n: usize,
    d: usize,
    norm: &Norm,
    gain: &[f64],
    g: &mut [f64],
    g_off: usize,
    b_off: usize,
) -> Vec<f64> {
    let mut dx = vec![0.0; n * d];
    for t in 0..n {
        let xh = &norm.xhat[t * d..(t + 1) * d];
        let dyr = &dy[t * d..(t + 1) * d];
        let mut dxhat = vec![0.0; d];
        for i in 0..d {
            g[g_off + i] += dyr[i] * xh[i];
            g[b_off + i] += dyr[i];
            dxhat[i] = dyr[i] * gain[i];
        }
        let mean_d = dxhat.iter().sum::<f64>() / d as f64;
        let mean_dx = dxhat.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        for i in 0..d {
            dx[t * d + i] = norm.inv_std[t] * (dxhat[i] - mean_d - xh[i] * mean_dx);
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    fn randomized(config: TransformerConfig, seed: u64) -> ToyTransformer {
        let mut m = ToyTransformer::new(config, seed).unwrap();
        let mut rng = crate::rng::seeded(seed + 1);
        for p in m.params_mut() {
            *p = rng.gen_range(-0.5..0.5);
        }
        m
    }

    #[test]
    fn layout_covers_parameters_without_overlap() {
        let m = ToyTransformer::new(TransformerConfig::tiny(32), 0).unwrap();
        let mut end = 0;
        for (_, r) in m.parameter_groups() {
            assert_eq!(r.start, end);
            end = r.end;
        }
        assert_eq!(end, m.num_params());
    }

    #[test]
    fn attention_rows_sum_to_one_and_respect_masks() {
        let m = randomized(TransformerConfig { window: 3, ..TransformerConfig::tiny(10) }, 2);
        let ids: Vec<u32> = (0..12).map(|i| i % 10).collect();
        let (_, trace) = m.forward_with_trace(&ids).unwrap();
        for l in 0..2 {
            let kind = m.config().layer_kind(l);
            for head in 0..2 {
                for i in 0..ids.len() {
                    let row = trace.row(l, head, i);
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                    for (j, &w) in row.iter().enumerate() {
                        if !kind.allows(i, j) {
                            assert_eq!(w, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn zero_head_gives_log_vocab_loss() {
        let mut m = ToyTransformer::new(TransformerConfig::tiny(32), 3).unwrap();
        m.zero_output_head();
        let (loss, _) = m.loss_and_grad(&[1, 2, 3, 4, 5]).unwrap();
        assert!((loss - (32f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn too_long_sequence_is_rejected() {
        let m = ToyTransformer::new(TransformerConfig::tiny(8), 0).unwrap();
        assert!(matches!(m.forward(&[0; 17]), Err(Error::SequenceTooLong { .. })));
        assert!(m.forward(&[9]).is_err());
        assert!(m.loss_and_grad(&[1]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences_on_sample() {
        let mut m = randomized(TransformerConfig::tiny(12), 5);
        let ids = [12, 3, 7, 1, 1, 9, 4, 0, 11];
        let (_, grads) = m.loss_and_grad(&ids).unwrap();
        let eps = 1e-5;
        for idx in (0..m.num_params()).step_by(7) {
            let orig = m.params[idx];
            m.params[idx] = orig + eps;
            let up = m.loss_and_grad(&ids).unwrap().0;
            m.params[idx] = orig - eps;
            let down = m.loss_and_grad(&ids).unwrap().0;
            m.params[idx] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let analytic = grads.values[idx];
            let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {idx}: {analytic} vs {numeric}");
        }
    }

    #[test]
    fn distribution_is_normalised() {
        let m = randomized(TransformerConfig::tiny(20), 9);
        let d = m.distribution(&[1, 2, 3]).unwrap();
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let lp = m.log_prob(&[1, 2, 3], 4).unwrap();
        assert!((lp - d[4].ln()).abs() < 1e-12);
        let long: Vec<u32> = (0..40).map(|i| i % 20).collect();
        assert!(m.distribution(&long).is_ok());
    }

    #[test]
    fn checkpoint_roundtrip_is_exact() {
        let m = randomized(TransformerConfig::tiny(6), 4);
        let back = ToyTransformer::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.forward(&[0, 1, 2]).unwrap(), m.forward(&[0, 1, 2]).unwrap());
    }
}
