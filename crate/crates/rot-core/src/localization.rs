//! Reasoning-error localization: per-prefix scores against the reading
//! vectors and downward zero-crossing marks, rendered as TSV/ANSI/HTML
//! salience reports.
//!
//! For a prompt `T` and response tokens `y_1..y_m`, the score of prefix
//! `T_i = T + y_1..y_i` at layer `k` is `h_k(T_i) . R_k - delta`, where
//! `h_k(T_i)` is the post-block activation at the last token of `T_i`. One
//! forward pass over the full sequence yields every prefix score at once:
//! the model's causal evaluation order makes position `i` of the full run
//! bit-identical to a separate run truncated at `i`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::linalg::{self, LinalgError};
use crate::model::{ModelError, ToyTransformer};
use crate::populations::{ActivationDump, Polarity, PopulationError};
use crate::reading::ReadingVectorSet;

#[derive(Debug, Error)]
pub enum LocalizationError {
    #[error("reader layer {layer} out of range for model depth {depth}")]
    LayerMismatch { layer: usize, depth: usize },
    #[error("reader dimension {reader} does not match activation dimension {model}")]
    DimensionMismatch { reader: usize, model: usize },
    #[error("response must be nonempty")]
    EmptyResponse,
    #[error("scores cover {scores} prefixes but the response has {tokens} tokens")]
    LengthMismatch { scores: usize, tokens: usize },
    #[error("dump is missing prefix record {id:?}")]
    MissingPrefixRecord { id: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Population(#[from] PopulationError),
}

/// Per-prefix scores: position 0 is the prompt-only baseline, position i
/// covers `T + y_1..y_i`.
#[derive(Debug, Clone)]
pub struct PrefixScores {
    pub delta: f64,
    pub layers: Vec<usize>,
    /// `per_layer[k][i]`, length m + 1 per layer.
    pub per_layer: BTreeMap<usize, Vec<f64>>,
    /// Arithmetic mean across layers at each prefix, length m + 1.
    pub mean: Vec<f64>,
}

impl PrefixScores {
    /// Build from raw per-layer projections (`h . R`), subtracting delta
    /// and averaging across layers.
    pub fn from_projections(
        projections: BTreeMap<usize, Vec<f64>>,
        delta: f64,
    ) -> Result<Self, LocalizationError> {
        let len = projections.values().next().map(Vec::len).unwrap_or(0);
        if len == 0 {
            return Err(LocalizationError::EmptyResponse);
        }
        let layer_count = projections.len() as f64;
        let mut per_layer = BTreeMap::new();
        let mut mean = vec![0.0f64; len];
        for (&layer, dots) in &projections {
            let scores: Vec<f64> = dots.iter().map(|d| d - delta).collect();
            for (m, s) in mean.iter_mut().zip(&scores) {
                *m += s;
            }
            per_layer.insert(layer, scores);
        }
        for m in &mut mean {
            *m /= layer_count;
        }
        Ok(Self { delta, layers: projections.keys().copied().collect(), per_layer, mean })
    }

    /// Number of response tokens covered (prefix count minus the baseline).
    pub fn response_len(&self) -> usize {
        self.mean.len() - 1
    }
}

fn validate_readers(
    readers: &ReadingVectorSet,
    depth: usize,
    dim: usize,
) -> Result<(), LocalizationError> {
    for layer in readers.layers() {
        if layer < 1 || layer > depth {
            return Err(LocalizationError::LayerMismatch { layer, depth });
        }
    }
    if readers.dim() != dim {
        return Err(LocalizationError::DimensionMismatch { reader: readers.dim(), model: dim });
    }
    Ok(())
}

/// Score every prefix of `prompt_ids + response_ids` with one forward pass.
pub fn score_prefixes(
    model: &ToyTransformer,
    prompt_ids: &[u32],
    response_ids: &[u32],
    readers: &ReadingVectorSet,
    delta: f64,
) -> Result<PrefixScores, LocalizationError> {
    if response_ids.is_empty() {
        return Err(LocalizationError::EmptyResponse);
    }
    validate_readers(readers, model.depth(), model.hidden_dim())?;
    let mut ids = Vec::with_capacity(prompt_ids.len() + response_ids.len());
    ids.extend_from_slice(prompt_ids);
    ids.extend_from_slice(response_ids);
    let (_, trace) = model.forward_with_taps(&ids, None)?;

    let base = prompt_ids.len() - 1;
    let mut projections = BTreeMap::new();
    for (layer, reader) in readers.vectors() {
        let mut dots = Vec::with_capacity(response_ids.len() + 1);
        for i in 0..=response_ids.len() {
            let h = trace.get(layer, base + i);
            dots.push(linalg::dot(h, reader)?);
        }
        projections.insert(layer, dots);
    }
    PrefixScores::from_projections(projections, delta)
}

/// Score prefixes from a dump holding one record per prefix, with ids
/// `base_id#p0 ..= base_id#p{m}` (polarity `+`), each carrying the
/// last-token activations of that prefix.
pub fn score_prefixes_from_dump(
    dump: &ActivationDump,
    base_id: &str,
    response_len: usize,
    readers: &ReadingVectorSet,
    delta: f64,
) -> Result<PrefixScores, LocalizationError> {
    if response_len == 0 {
        return Err(LocalizationError::EmptyResponse);
    }
    if readers.dim() != dump.dim {
        return Err(LocalizationError::DimensionMismatch {
            reader: readers.dim(),
            model: dump.dim,
        });
    }
    let mut projections: BTreeMap<usize, Vec<f64>> =
        readers.layers().into_iter().map(|k| (k, Vec::new())).collect();
    for i in 0..=response_len {
        let id = prefix_record_id(base_id, i);
        let record = dump
            .record(&id, Polarity::Positive)
            .ok_or_else(|| LocalizationError::MissingPrefixRecord { id: id.clone() })?;
        for (layer, reader) in readers.vectors() {
            let values = record
                .get(&layer)
                .ok_or(PopulationError::DumpMissingLayer { layer })?;
            let dot = values
                .iter()
                .zip(reader.as_slice())
                .fold(0.0, |acc, (a, b)| acc + a * b);
            projections.get_mut(&layer).expect("layer present").push(dot);
        }
    }
    PrefixScores::from_projections(projections, delta)
}

/// Dump record id for prefix `i` of a localization item.
pub fn prefix_record_id(base_id: &str, i: usize) -> String {
    format!("{base_id}#p{i}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenMark {
    pub token: String,
    pub score: f64,
    pub marked: bool,
}

/// Tokens with their mean scores and reasoning-error marks.
#[derive(Debug, Clone)]
pub struct SalienceReport {
    pub prompt: String,
    pub delta: f64,
    pub layers: Vec<usize>,
    pub entries: Vec<TokenMark>,
}

impl SalienceReport {
    pub fn marked_indices(&self) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter_map(|(i, e)| e.marked.then_some(i))
            .collect()
    }
}

/// Mark token `i` iff the mean score turns negative there: `mean_i < 0` and
/// `mean_{i-1} >= 0`, with the prompt-only score as the i = 0 baseline.
pub fn localize(
    scores: &PrefixScores,
    prompt: &str,
    response_tokens: &[String],
) -> Result<SalienceReport, LocalizationError> {
    if scores.mean.len() != response_tokens.len() + 1 {
        return Err(LocalizationError::LengthMismatch {
            scores: scores.mean.len(),
            tokens: response_tokens.len(),
        });
    }
    let entries = response_tokens
        .iter()
        .enumerate()
        .map(|(idx, token)| {
            let i = idx + 1;
            let marked = scores.mean[i] < 0.0 && scores.mean[i - 1] >= 0.0;
            TokenMark { token: token.clone(), score: scores.mean[i], marked }
        })
        .collect();
    Ok(SalienceReport {
        prompt: prompt.to_string(),
        delta: scores.delta,
        layers: scores.layers.clone(),
        entries,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `token <tab> score <tab> mark` rows.
    Tsv,
    /// Green/red colored tokens with score annotations.
    Ansi,
    /// Static page: red spans for marks, scores as tooltips.
    Html,
}

/// Pure function of the report; identical reports give identical bytes.
pub fn render_report(report: &SalienceReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Tsv => render_tsv(report),
        ReportFormat::Ansi => render_ansi(report),
        ReportFormat::Html => render_html(report),
    }
}

fn render_tsv(report: &SalienceReport) -> String {
    let mut out = String::from("token\tscore\tmark\n");
    for entry in &report.entries {
        let mark = if entry.marked { "reasoning_error" } else { "ok" };
        out.push_str(&format!("{}\t{:.6}\t{}\n", entry.token, entry.score, mark));
    }
    out
}

fn render_ansi(report: &SalienceReport) -> String {
    const GREEN: &str = "\x1b[32m";
    const RED: &str = "\x1b[31m";
    const RESET: &str = "\x1b[0m";
    let mut out = format!(
        "prompt: {}\ndelta: {}\nlayers: {:?}\n\n",
        report.prompt, report.delta, report.layers
    );
    for entry in &report.entries {
        let color = if entry.marked { RED } else { GREEN };
        out.push_str(&format!("{color}{}({:.2}){RESET} ", entry.token, entry.score));
    }
    out.push('\n');
    out
}

fn html_escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn render_html(report: &SalienceReport) -> String {
    let mut out = String::from(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n\
         <title>salience report</title>\n<style>\n\
         body { font-family: monospace; margin: 2em; }\n\
         .tok { padding: 1px 2px; }\n\
         .ok { background: #e7f6e7; }\n\
         .err { background: #f6d6d6; color: #7a0000; font-weight: bold; }\n\
         .meta { color: #555; margin-bottom: 1em; }\n</style>\n</head>\n<body>\n",
    );
    out.push_str(&format!(
        "<div class=\"meta\">prompt: {}<br>delta: {}<br>layers: {:?}</div>\n<p>\n",
        html_escape(&report.prompt),
        report.delta,
        report.layers
    ));
    for entry in &report.entries {
        let class = if entry.marked { "tok err" } else { "tok ok" };
        out.push_str(&format!(
            "<span class=\"{class}\" title=\"{:.6}\">{}</span>\n",
            entry.score,
            html_escape(&entry.token)
        ));
    }
    out.push_str("</p>\n</body>\n</html>\n");
    out
}
