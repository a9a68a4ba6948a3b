//! Deterministic toy decoder-only transformer.
//!
//! Pre-norm blocks (self-attention + MLP), learned positional embeddings,
//! no dropout. Every reduction runs in a fixed left-to-right order and
//! attention is computed per query position over the cached prefix, so the
//! activations at position `i` are bit-identical whether the sequence was
//! processed whole or truncated at `i` (the prefix-trace equivalence the
//! localization stage relies on).

use std::collections::BTreeMap;

use crate::linalg::Vector;
use crate::rng::{subseed, SplitMix64};

use super::ModelError;

/// Positional-embedding table length; sequences must stay under this.
pub const MAX_SEQ: usize = 1024;

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalNorm {
    Standard,
    Identity,
}

#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    /// Number of decoder blocks (L).
    pub layers: usize,
    /// Residual stream width (d).
    pub hidden_dim: usize,
    pub heads: usize,
    /// Vocabulary size (V).
    pub vocab_size: usize,
    pub final_norm: FinalNorm,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { layers: 6, hidden_dim: 64, heads: 4, vocab_size: 512, final_norm: FinalNorm::Standard }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.layers < 1 {
            return Err(ModelError::InvalidConfig("layers must be >= 1".into()));
        }
        if self.hidden_dim < 2 {
            return Err(ModelError::InvalidConfig("hidden_dim must be >= 2".into()));
        }
        if self.heads < 1 || !self.hidden_dim.is_multiple_of(self.heads) {
            return Err(ModelError::InvalidConfig(format!(
                "hidden_dim {} must be divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if self.vocab_size < 4 {
            return Err(ModelError::InvalidConfig("vocab_size must be >= 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LayerWeights {
    pub ln1_gain: Vec<f64>,
    pub ln1_bias: Vec<f64>,
    /// d x d, row-major `[input][output]`.
    pub wq: Vec<f64>,
    pub wk: Vec<f64>,
    pub wv: Vec<f64>,
    pub wo: Vec<f64>,
    pub ln2_gain: Vec<f64>,
    pub ln2_bias: Vec<f64>,
    /// d x 4d.
    pub w_up: Vec<f64>,
    /// 4d x d.
    pub w_down: Vec<f64>,
}

/// What `build_planted` wires in: adding `alpha * direction` to the residual
/// stream at `layer` moves `logit(target_token)` by exactly `alpha * slope`.
#[derive(Debug, Clone)]
pub struct PlantedInfo {
    /// 1-indexed; always the last layer.
    pub layer: usize,
    pub target_token: u32,
    /// Unit direction the unembedding row of the target was boosted along.
    pub direction: Vector,
    /// `unembedding_row(target_token) . direction`, recorded at build time.
    pub slope: f64,
}

#[derive(Debug, Clone)]
pub struct ToyTransformer {
    pub(crate) config: ModelConfig,
    pub(crate) seed: u64,
    /// V x d.
    pub(crate) tok_emb: Vec<f64>,
    /// MAX_SEQ x d.
    pub(crate) pos_emb: Vec<f64>,
    pub(crate) layers: Vec<LayerWeights>,
    pub(crate) final_gain: Vec<f64>,
    pub(crate) final_bias: Vec<f64>,
    /// d x V, row-major `[hidden][token]`.
    pub(crate) unembed: Vec<f64>,
    pub(crate) planted: Option<PlantedInfo>,
    pub(crate) model_id: String,
}

/// Post-block residual activations for every layer and position.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    dim: usize,
    prompt_length: usize,
    /// `data[layer - 1][position]`.
    data: Vec<Vec<Vector>>,
}

impl ActivationTrace {
    pub fn layer_count(&self) -> usize {
        self.data.len()
    }

    pub fn position_count(&self) -> usize {
        self.data[0].len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Length of the prompt this trace was produced from (positions beyond
    /// it belong to generated tokens).
    pub fn prompt_length(&self) -> usize {
        self.prompt_length
    }

    /// `layer` is 1-indexed, matching the layer-set convention.
    pub fn get(&self, layer: usize, position: usize) -> &Vector {
        &self.data[layer - 1][position]
    }

    pub fn last(&self, layer: usize) -> &Vector {
        self.data[layer - 1].last().expect("trace has at least one position")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    /// `alpha_k = |alpha| * sign(h_k(T) . R_k)`, evaluated per layer on the
    /// clean stream at the application position and frozen; `sign(0) = +1`.
    FollowProjection,
    FixedPositive,
    FixedNegative,
}

pub fn effective_alpha(alpha: f64, sign_mode: SignMode, projection: f64) -> f64 {
    match sign_mode {
        SignMode::FollowProjection => {
            if projection < 0.0 {
                -alpha.abs()
            } else {
                alpha.abs()
            }
        }
        SignMode::FixedPositive => alpha.abs(),
        SignMode::FixedNegative => -alpha.abs(),
    }
}

/// Residual-stream injection: from `start_pos` onward, the post-block
/// activation of every layer in the set becomes `h + alpha_k * R_k`.
#[derive(Debug, Clone)]
pub struct InjectionHook {
    directions: BTreeMap<usize, Vector>,
    pub alpha: f64,
    pub sign_mode: SignMode,
    /// First position (0-indexed) the offsets apply to; generation sets
    /// this to the prompt's last token.
    pub start_pos: usize,
}

impl InjectionHook {
    pub fn new(
        directions: BTreeMap<usize, Vector>,
        alpha: f64,
        sign_mode: SignMode,
        start_pos: usize,
    ) -> Result<Self, ModelError> {
        if !alpha.is_finite() {
            return Err(ModelError::InvalidConfig("hook alpha must be finite".into()));
        }
        for (layer, dir) in &directions {
            if (dir.norm() - 1.0).abs() > 1e-6 {
                return Err(ModelError::InvalidConfig(format!(
                    "hook direction for layer {layer} is not unit-norm"
                )));
            }
        }
        Ok(Self { directions, alpha, sign_mode, start_pos })
    }

    pub fn layers(&self) -> impl Iterator<Item = usize> + '_ {
        self.directions.keys().copied()
    }

    pub fn direction(&self, layer: usize) -> Option<&Vector> {
        self.directions.get(&layer)
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Per-layer signed scales and offsets after sign resolution.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedOffsets {
    pub start_pos: usize,
    /// layer -> alpha_k * R_k
    pub offsets: BTreeMap<usize, Vec<f64>>,
}

impl ToyTransformer {
    /// Seeded construction; same seed and config give bit-identical weights.
    pub fn build(seed: u64, config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.hidden_dim;
        let v = config.vocab_size;
        let ff = 4 * d;

        // Per-tensor streams so tensor order never shifts another tensor's
        // draws. Scales: unit-variance embeddings, 1/sqrt(d) projections.
        let gauss = |name: &str, len: usize, scale: f64| -> Vec<f64> {
            let mut rng = SplitMix64::new(subseed(seed, name));
            (0..len).map(|_| rng.next_gaussian() * scale).collect()
        };
        let proj_scale = 1.0 / (d as f64).sqrt();
        let ff_scale = 1.0 / (ff as f64).sqrt();

        let tok_emb = gauss("tok_emb", v * d, 1.0);
        let pos_emb = gauss("pos_emb", MAX_SEQ * d, 1.0);
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let name = |part: &str| format!("layer{l}.{part}");
            let ln_gain = |part: &str| {
                let mut rng = SplitMix64::new(subseed(seed, &name(part)));
                (0..d).map(|_| 1.0 + 0.02 * rng.next_gaussian()).collect::<Vec<f64>>()
            };
            let ln_bias = |part: &str| gauss(&name(part), d, 0.02);
            layers.push(LayerWeights {
                ln1_gain: ln_gain("ln1_gain"),
                ln1_bias: ln_bias("ln1_bias"),
                wq: gauss(&name("wq"), d * d, proj_scale),
                wk: gauss(&name("wk"), d * d, proj_scale),
                wv: gauss(&name("wv"), d * d, proj_scale),
                wo: gauss(&name("wo"), d * d, proj_scale),
                ln2_gain: ln_gain("ln2_gain"),
                ln2_bias: ln_bias("ln2_bias"),
                w_up: gauss(&name("w_up"), d * ff, proj_scale),
                w_down: gauss(&name("w_down"), ff * d, ff_scale),
            });
        }
        let (final_gain, final_bias) = match config.final_norm {
            FinalNorm::Standard => {
                let mut rng = SplitMix64::new(subseed(seed, "final_gain"));
                let gain = (0..d).map(|_| 1.0 + 0.02 * rng.next_gaussian()).collect();
                (gain, gauss("final_bias", d, 0.02))
            }
            FinalNorm::Identity => (vec![1.0; d], vec![0.0; d]),
        };
        let unembed = gauss("unembed", d * v, proj_scale);

        let mut model = Self {
            config,
            seed,
            tok_emb,
            pos_emb,
            layers,
            final_gain,
            final_bias,
            unembed,
            planted: None,
            model_id: String::new(),
        };
        model.model_id = model.digest_id();
        Ok(model)
    }

    /// Build a model whose steering response at the last layer is known in
    /// closed form: the unembedding row of `target_token` is boosted along
    /// `direction`, and the resulting slope `row(target) . direction` is
    /// recorded. Requires injection layer = last layer and an identity
    /// final norm so offsets reach the logits linearly.
    pub fn build_planted(
        seed: u64,
        config: ModelConfig,
        layer: usize,
        direction: &Vector,
        target_token: u32,
    ) -> Result<Self, ModelError> {
        if layer != config.layers {
            return Err(ModelError::InvalidConfig(format!(
                "planted layer must be the last layer ({}), got {layer}",
                config.layers
            )));
        }
        if config.final_norm != FinalNorm::Identity {
            return Err(ModelError::InvalidConfig(
                "planted models require an identity final norm".into(),
            ));
        }
        if direction.len() != config.hidden_dim {
            return Err(ModelError::InvalidConfig(format!(
                "planted direction has {} entries, hidden_dim is {}",
                direction.len(),
                config.hidden_dim
            )));
        }
        if target_token as usize >= config.vocab_size {
            return Err(ModelError::TokenOutOfRange {
                id: target_token,
                vocab: config.vocab_size as u32,
            });
        }
        let mut model = Self::build(seed, config)?;
        let unit = direction.scaled(1.0 / direction.norm());
        let d = config.hidden_dim;
        let v = config.vocab_size;
        const BOOST: f64 = 4.0;
        for c in 0..d {
            model.unembed[c * v + target_token as usize] += BOOST * unit[c];
        }
        let slope = model.unembedding_row(target_token).iter().zip(unit.as_slice()).fold(
            0.0,
            |acc, (w, u)| acc + w * u,
        );
        model.planted = Some(PlantedInfo {
            layer,
            target_token,
            direction: unit,
            slope,
        });
        model.model_id = model.digest_id();
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depth(&self) -> usize {
        self.config.layers
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    pub fn planted(&self) -> Option<&PlantedInfo> {
        self.planted.as_ref()
    }

    /// Stable identity: digest of the serialized checkpoint bytes.
    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    /// The d weights mapping the final hidden state to `logit(token)`.
    pub fn unembedding_row(&self, token: u32) -> Vec<f64> {
        let d = self.config.hidden_dim;
        let v = self.config.vocab_size;
        (0..d).map(|c| self.unembed[c * v + token as usize]).collect()
    }

    fn check_tokens(&self, ids: &[u32]) -> Result<(), ModelError> {
        for &id in ids {
            if id as usize >= self.config.vocab_size {
                return Err(ModelError::TokenOutOfRange {
                    id,
                    vocab: self.config.vocab_size as u32,
                });
            }
        }
        Ok(())
    }

    fn check_hook_layers(&self, hook: &InjectionHook) -> Result<(), ModelError> {
        for layer in hook.layers() {
            if layer < 1 || layer > self.config.layers {
                return Err(ModelError::LayerOutOfRange { layer, depth: self.config.layers });
            }
            let dir = hook.direction(layer).expect("layer key exists");
            if dir.len() != self.config.hidden_dim {
                return Err(ModelError::InvalidConfig(format!(
                    "hook direction for layer {layer} has {} entries, hidden_dim is {}",
                    dir.len(),
                    self.config.hidden_dim
                )));
            }
        }
        Ok(())
    }

    /// Resolve per-layer signed scales. Follow-projection signs come from a
    /// clean (hook-free) pass over `ids[..=start_pos]`, so they depend only
    /// on the unsteered stream and stay frozen afterwards.
    pub(crate) fn resolve_offsets(
        &self,
        hook: &InjectionHook,
        ids: &[u32],
    ) -> Result<ResolvedOffsets, ModelError> {
        self.check_hook_layers(hook)?;
        if hook.start_pos >= ids.len() {
            return Err(ModelError::InvalidConfig(format!(
                "hook start_pos {} is past the sequence (len {})",
                hook.start_pos,
                ids.len()
            )));
        }
        let mut offsets = BTreeMap::new();
        if hook.is_empty() {
            return Ok(ResolvedOffsets { start_pos: hook.start_pos, offsets });
        }
        let projections = match hook.sign_mode {
            SignMode::FollowProjection => {
                let (_, trace) = self.forward_with_taps(&ids[..=hook.start_pos], None)?;
                let mut map = BTreeMap::new();
                for layer in hook.layers() {
                    let h = trace.last(layer);
                    let dir = hook.direction(layer).expect("layer key exists");
                    let proj = h
                        .as_slice()
                        .iter()
                        .zip(dir.as_slice())
                        .fold(0.0, |acc, (a, b)| acc + a * b);
                    map.insert(layer, proj);
                }
                map
            }
            _ => BTreeMap::new(),
        };
        for layer in hook.layers() {
            let proj = projections.get(&layer).copied().unwrap_or(0.0);
            let alpha = effective_alpha(hook.alpha, hook.sign_mode, proj);
            let dir = hook.direction(layer).expect("layer key exists");
            offsets.insert(layer, dir.as_slice().iter().map(|&v| v * alpha).collect());
        }
        Ok(ResolvedOffsets { start_pos: hook.start_pos, offsets })
    }

    /// Causal forward pass over the whole sequence, returning per-position
    /// logits and the post-block residual trace (post-injection where the
    /// hook applies).
    pub fn forward_with_taps(
        &self,
        token_ids: &[u32],
        hook: Option<&InjectionHook>,
    ) -> Result<(Vec<Vec<f64>>, ActivationTrace), ModelError> {
        if token_ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        self.check_tokens(token_ids)?;
        let resolved = match hook {
            Some(h) => Some(self.resolve_offsets(h, token_ids)?),
            None => None,
        };
        let mut run = Runtime::new(self, resolved, token_ids.len());
        let mut logits = Vec::with_capacity(token_ids.len());
        for (pos, &id) in token_ids.iter().enumerate() {
            logits.push(run.push_token(id, pos)?);
        }
        Ok((logits, run.into_trace(token_ids.len())))
    }

    /// Greedy decoding; ties break toward the lowest token id. Returns only
    /// the newly generated ids (including `<eos>` when it stops the run).
    pub fn generate(
        &self,
        prompt_ids: &[u32],
        max_new_tokens: usize,
        eos_id: Option<u32>,
        hook: Option<&InjectionHook>,
    ) -> Result<Vec<u32>, ModelError> {
        if max_new_tokens < 1 {
            return Err(ModelError::InvalidConfig("max_new_tokens must be >= 1".into()));
        }
        if prompt_ids.is_empty() {
            return Err(ModelError::EmptySequence);
        }
        self.check_tokens(prompt_ids)?;
        let resolved = match hook {
            Some(h) => {
                let mut h = h.clone();
                h.start_pos = prompt_ids.len() - 1;
                Some(self.resolve_offsets(&h, prompt_ids)?)
            }
            None => None,
        };
        let mut run = Runtime::new(self, resolved, prompt_ids.len() + max_new_tokens);
        let mut last_logits = Vec::new();
        for (pos, &id) in prompt_ids.iter().enumerate() {
            last_logits = run.push_token(id, pos)?;
        }
        let mut out = Vec::new();
        for position in (prompt_ids.len()..).take(max_new_tokens) {
            let next = argmax_lowest_id(&last_logits);
            out.push(next);
            if eos_id == Some(next) || position >= MAX_SEQ {
                break;
            }
            last_logits = run.push_token(next, position)?;
        }
        Ok(out)
    }

    /// `exp(mean over i >= 2 of -ln p(token_i | tokens_<i))`, natural log.
    pub fn perplexity(&self, token_ids: &[u32]) -> Result<f64, ModelError> {
        if token_ids.len() < 2 {
            return Err(ModelError::SequenceTooShort);
        }
        let (logits, _) = self.forward_with_taps(token_ids, None)?;
        Ok(perplexity_from_logits(&logits, token_ids))
    }
}

/// Perplexity given per-position logits for the same sequence. Split out so
/// the formula can be checked against hand-crafted distributions.
pub fn perplexity_from_logits(logits: &[Vec<f64>], token_ids: &[u32]) -> f64 {
    let mut total = 0.0;
    let steps = token_ids.len() - 1;
    for i in 1..token_ids.len() {
        total += -log_softmax_at(&logits[i - 1], token_ids[i] as usize);
    }
    (total / steps as f64).exp()
}

fn log_softmax_at(logits: &[f64], index: usize) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for &l in logits {
        if l > max {
            max = l;
        }
    }
    let mut sum = 0.0;
    for &l in logits {
        sum += (l - max).exp();
    }
    (logits[index] - max) - sum.ln()
}

fn argmax_lowest_id(logits: &[f64]) -> u32 {
    let mut best = 0usize;
    for (i, &l) in logits.iter().enumerate() {
        if l > logits[best] {
            best = i;
        }
    }
    best as u32
}

/// Incremental forward state: per-layer KV caches plus the recorded trace.
struct Runtime<'m> {
    model: &'m ToyTransformer,
    resolved: Option<ResolvedOffsets>,
    /// keys[layer][position], values[layer][position]: d-wide rows.
    keys: Vec<Vec<Vec<f64>>>,
    values: Vec<Vec<Vec<f64>>>,
    /// trace[layer][position]: post-block residual.
    trace: Vec<Vec<Vec<f64>>>,
}

impl<'m> Runtime<'m> {
    fn new(model: &'m ToyTransformer, resolved: Option<ResolvedOffsets>, capacity: usize) -> Self {
        let l = model.config.layers;
        Self {
            model,
            resolved,
            keys: (0..l).map(|_| Vec::with_capacity(capacity)).collect(),
            values: (0..l).map(|_| Vec::with_capacity(capacity)).collect(),
            trace: (0..l).map(|_| Vec::with_capacity(capacity)).collect(),
        }
    }

    fn push_token(&mut self, id: u32, position: usize) -> Result<Vec<f64>, ModelError> {
        let m = self.model;
        let d = m.config.hidden_dim;
        let heads = m.config.heads;
        let dk = d / heads;
        let inv_sqrt_dk = 1.0 / (dk as f64).sqrt();
        if position >= MAX_SEQ {
            return Err(ModelError::SequenceTooLong { len: position + 1, max: MAX_SEQ });
        }

        let tok = &m.tok_emb[id as usize * d..(id as usize + 1) * d];
        let pos = &m.pos_emb[position * d..(position + 1) * d];
        let mut x: Vec<f64> = tok.iter().zip(pos).map(|(t, p)| t + p).collect();

        for (l, w) in m.layers.iter().enumerate() {
            let normed = layer_norm(&x, &w.ln1_gain, &w.ln1_bias);
            let q = mat_vec(&normed, &w.wq, d, d);
            let k = mat_vec(&normed, &w.wk, d, d);
            let v = mat_vec(&normed, &w.wv, d, d);
            self.keys[l].push(k);
            self.values[l].push(v);

            // Causal attention per head over cached positions 0..=position.
            let mut attn = vec![0.0f64; d];
            let cached = position + 1;
            for h in 0..heads {
                let span = h * dk..(h + 1) * dk;
                let qh = &q[span.clone()];
                let mut scores = Vec::with_capacity(cached);
                let mut max = f64::NEG_INFINITY;
                for j in 0..cached {
                    let kh = &self.keys[l][j][span.clone()];
                    let mut s = 0.0;
                    for (a, b) in qh.iter().zip(kh) {
                        s += a * b;
                    }
                    s *= inv_sqrt_dk;
                    if s > max {
                        max = s;
                    }
                    scores.push(s);
                }
                let mut denom = 0.0;
                for s in &mut scores {
                    *s = (*s - max).exp();
                    denom += *s;
                }
                for (j, &weight) in scores.iter().enumerate() {
                    let vh = &self.values[l][j][span.clone()];
                    for (out, val) in attn[span.clone()].iter_mut().zip(vh) {
                        *out += weight * val;
                    }
                }
                for out in attn[span.clone()].iter_mut() {
                    *out /= denom;
                }
            }
            let attn_out = mat_vec(&attn, &w.wo, d, d);
            for (xi, a) in x.iter_mut().zip(&attn_out) {
                *xi += a;
            }

            let normed2 = layer_norm(&x, &w.ln2_gain, &w.ln2_bias);
            let up = mat_vec(&normed2, &w.w_up, d, 4 * d);
            let act: Vec<f64> = up.iter().map(|&u| gelu(u)).collect();
            let down = mat_vec(&act, &w.w_down, 4 * d, d);
            for (xi, mo) in x.iter_mut().zip(&down) {
                *xi += mo;
            }

            // Post-block residual: inject, then record; downstream layers
            // and the cached K/V of later positions all see the offset.
            if let Some(resolved) = &self.resolved {
                if position >= resolved.start_pos {
                    if let Some(offset) = resolved.offsets.get(&(l + 1)) {
                        for (xi, o) in x.iter_mut().zip(offset) {
                            *xi += o;
                        }
                    }
                }
            }
            for (i, &xi) in x.iter().enumerate() {
                if !xi.is_finite() {
                    return Err(ModelError::NonFinite { layer: l + 1, position, component: i });
                }
            }
            self.trace[l].push(x.clone());
        }

        let finals = match m.config.final_norm {
            FinalNorm::Standard => layer_norm(&x, &m.final_gain, &m.final_bias),
            FinalNorm::Identity => x,
        };
        Ok(mat_vec(&finals, &m.unembed, d, m.config.vocab_size))
    }

    fn into_trace(self, prompt_length: usize) -> ActivationTrace {
        let dim = self.model.config.hidden_dim;
        let data = self
            .trace
            .into_iter()
            .map(|layer| {
                layer
                    .into_iter()
                    .map(|row| Vector::new(row).expect("forward produced finite activations"))
                    .collect()
            })
            .collect();
        ActivationTrace { dim, prompt_length, data }
    }
}

fn layer_norm(x: &[f64], gain: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = x.len() as f64;
    let mut mean = 0.0;
    for &v in x {
        mean += v;
    }
    mean /= n;
    let mut var = 0.0;
    for &v in x {
        var += (v - mean) * (v - mean);
    }
    var /= n;
    let inv = 1.0 / (var + LN_EPS).sqrt();
    x.iter()
        .zip(gain.iter().zip(bias))
        .map(|(&v, (&g, &b))| (v - mean) * inv * g + b)
        .collect()
}

/// Row-vector times row-major matrix: `out[j] = sum_i x[i] * w[i * cols + j]`.
fn mat_vec(x: &[f64], w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    debug_assert_eq!(x.len(), rows);
    debug_assert_eq!(w.len(), rows * cols);
    let mut out = vec![0.0f64; cols];
    for (i, &xi) in x.iter().enumerate() {
        let row = &w[i * cols..(i + 1) * cols];
        for (o, &wij) in out.iter_mut().zip(row) {
            *o += xi * wij;
        }
    }
    out
}

fn gelu(x: f64) -> f64 {
    const SQRT_2_OVER_PI: f64 = 0.7978845608028654;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044715 * x * x * x)).tanh())
}
