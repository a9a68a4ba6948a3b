//! Last-token activation capture over a layer subset, difference-vector
//! assembly, and the activation-dump interchange format.
//!
//! For every prompt pair the capture runs (or reads from a dump) both
//! prompts, takes the last-token post-block residual at each selected
//! layer, and stores the difference `h_k(p+) - h_k(p-)`. Rows follow the
//! stimulus-set order, so the resulting population digest is reproducible.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Cursor, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::format::{
    expect_eof, expect_magic, read_f32_vec_as_f64, read_f64_vec, read_string, read_u32, read_u8,
    write_f32_slice, write_f64_slice, write_magic, write_string, write_u32, write_u8, FormatError,
};
use crate::linalg::{LinalgError, SampleMatrix, Vector};
use crate::model::{ModelError, Tokenizer, ToyTransformer};
use crate::stimuli::StimulusSet;

pub const DUMP_MAGIC: &[u8; 4] = b"ROTD";
const DUMP_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PopulationError {
    #[error("layer {layer} out of range for depth {depth}")]
    LayerOutOfRange { layer: usize, depth: usize },
    #[error("layer selection is empty")]
    EmptyLayerSelection,
    #[error("prompt {record_id:?} ({polarity}) tokenizes to zero tokens")]
    EmptyPrompt { record_id: String, polarity: char },
    #[error("dump is missing layer {layer}")]
    DumpMissingLayer { layer: usize },
    #[error("dump is missing prompt {id:?} ({polarity})")]
    DumpMissingPrompt { id: String, polarity: char },
    #[error("dump dimension {dump} does not match expected {expected}")]
    DimensionMismatch { dump: usize, expected: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    File(#[from] FormatError),
}

/// How to pick the layer subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LayerSpec {
    /// The `n` highest layer indices.
    Last(usize),
    /// Explicit 1-indexed layer indices.
    Explicit(Vec<usize>),
}

impl LayerSpec {
    /// Parse `last:5` or a comma list like `8,9,10`.
    pub fn parse(text: &str) -> Result<Self, String> {
        let text = text.trim();
        if let Some(n) = text.strip_prefix("last:") {
            let n: usize = n.trim().parse().map_err(|_| format!("bad layer count in {text:?}"))?;
            return Ok(Self::Last(n));
        }
        let mut layers = Vec::new();
        for part in text.split(',') {
            let layer: usize =
                part.trim().parse().map_err(|_| format!("bad layer index {part:?}"))?;
            layers.push(layer);
        }
        if layers.is_empty() {
            return Err("empty layer spec".into());
        }
        Ok(Self::Explicit(layers))
    }
}

/// Resolved, sorted, validated 1-indexed layer subset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSelection {
    layers: Vec<usize>,
}

impl LayerSelection {
    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn max_layer(&self) -> usize {
        *self.layers.last().expect("selection is nonempty")
    }

    pub fn contains(&self, layer: usize) -> bool {
        self.layers.binary_search(&layer).is_ok()
    }
}

/// `last(n)` resolves to the `n` highest indices `{depth-n+1, ..., depth}`;
/// anything outside `1..=depth` is an error rather than being clamped.
pub fn resolve_layers(spec: &LayerSpec, model_depth: usize) -> Result<LayerSelection, PopulationError> {
    let layers = match spec {
        LayerSpec::Last(n) => {
            if *n == 0 {
                return Err(PopulationError::EmptyLayerSelection);
            }
            if *n > model_depth {
                return Err(PopulationError::LayerOutOfRange { layer: *n, depth: model_depth });
            }
            ((model_depth - n + 1)..=model_depth).collect()
        }
        LayerSpec::Explicit(raw) => {
            if raw.is_empty() {
                return Err(PopulationError::EmptyLayerSelection);
            }
            let mut layers: Vec<usize> = raw.clone();
            layers.sort_unstable();
            layers.dedup();
            for &layer in &layers {
                if layer < 1 || layer > model_depth {
                    return Err(PopulationError::LayerOutOfRange { layer, depth: model_depth });
                }
            }
            layers
        }
    };
    Ok(LayerSelection { layers })
}

#[derive(Debug, Clone)]
pub struct PopulationProvenance {
    pub stimulus_digest: String,
    pub model_id: String,
    /// Always `last_token`: activations are read at the final input token.
    pub capture_position: String,
    pub query_count: usize,
    pub stimulus_count: usize,
    pub stimulus_kind: String,
}

/// Per-layer matrices of activation difference vectors, one row per prompt
/// pair in stimulus-set order.
#[derive(Debug, Clone)]
pub struct PopulationSet {
    matrices: BTreeMap<usize, SampleMatrix>,
    provenance: PopulationProvenance,
}

impl PopulationSet {
    /// Assemble from per-layer matrices (the capture path and synthetic
    /// test populations both land here). All matrices must agree on row
    /// count and width.
    pub fn from_matrices(
        matrices: BTreeMap<usize, SampleMatrix>,
        provenance: PopulationProvenance,
    ) -> Result<Self, PopulationError> {
        if matrices.is_empty() {
            return Err(PopulationError::EmptyLayerSelection);
        }
        let mut shape: Option<(usize, usize)> = None;
        for matrix in matrices.values() {
            let this = (matrix.row_count(), matrix.dim());
            match shape {
                None => shape = Some(this),
                Some(expected) if expected != this => {
                    return Err(PopulationError::DimensionMismatch {
                        dump: this.1,
                        expected: expected.1,
                    })
                }
                _ => {}
            }
        }
        Ok(Self { matrices, provenance })
    }

    pub fn layers(&self) -> Vec<usize> {
        self.matrices.keys().copied().collect()
    }

    pub fn matrix(&self, layer: usize) -> Option<&SampleMatrix> {
        self.matrices.get(&layer)
    }

    pub fn matrices(&self) -> impl Iterator<Item = (usize, &SampleMatrix)> {
        self.matrices.iter().map(|(k, m)| (*k, m))
    }

    pub fn row_count(&self) -> usize {
        self.matrices.values().next().map(SampleMatrix::row_count).unwrap_or(0)
    }

    pub fn dim(&self) -> usize {
        self.matrices.values().next().map(SampleMatrix::dim).unwrap_or(0)
    }

    pub fn provenance(&self) -> &PopulationProvenance {
        &self.provenance
    }

    /// Digest over layers, row data, and provenance; row order is a
    /// deterministic function of the stimulus-set order, so so is this.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.provenance.stimulus_digest.as_bytes());
        hasher.update(self.provenance.model_id.as_bytes());
        for (layer, matrix) in &self.matrices {
            hasher.update((*layer as u32).to_le_bytes());
            for row in matrix.rows() {
                for &v in row.as_slice() {
                    hasher.update(v.to_le_bytes());
                }
            }
        }
        let digest = hasher.finalize();
        digest[..12].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Where activations come from: live forwards or a dump file.
pub enum CaptureSource<'a> {
    Live { model: &'a ToyTransformer, tokenizer: &'a Tokenizer },
    Dump(&'a ActivationDump),
}

/// Capture the per-layer difference-vector population for a stimulus set.
pub fn capture_population(
    source: &CaptureSource<'_>,
    set: &StimulusSet,
    layers: &LayerSelection,
) -> Result<PopulationSet, PopulationError> {
    let rows = match source {
        CaptureSource::Live { model, tokenizer } => capture_live(model, tokenizer, set, layers)?,
        CaptureSource::Dump(dump) => capture_from_dump(dump, set, layers)?,
    };
    let mut matrices = BTreeMap::new();
    for (i, &layer) in layers.layers().iter().enumerate() {
        let layer_rows: Vec<Vector> = rows
            .iter()
            .map(|per_pair| Vector::new(per_pair[i].clone()))
            .collect::<Result<_, _>>()?;
        matrices.insert(layer, SampleMatrix::new(layer_rows)?);
    }
    let model_id = match source {
        CaptureSource::Live { model, .. } => model.model_id().to_string(),
        CaptureSource::Dump(dump) => dump.model_id.clone(),
    };
    PopulationSet::from_matrices(
        matrices,
        PopulationProvenance {
            stimulus_digest: set.digest(),
            model_id,
            capture_position: "last_token".to_string(),
            query_count: set.query_count(),
            stimulus_count: set.stimulus_count(),
            stimulus_kind: set.kind().label().to_string(),
        },
    )
}

/// Returns, per pair, the per-selected-layer difference vectors.
fn capture_live(
    model: &ToyTransformer,
    tokenizer: &Tokenizer,
    set: &StimulusSet,
    layers: &LayerSelection,
) -> Result<Vec<Vec<Vec<f64>>>, PopulationError> {
    if layers.max_layer() > model.depth() {
        return Err(PopulationError::LayerOutOfRange {
            layer: layers.max_layer(),
            depth: model.depth(),
        });
    }
    // Forward passes for distinct pairs run in parallel; the ordered
    // collect keeps row order equal to stimulus-set order regardless of
    // worker count.
    set.pairs()
        .par_iter()
        .map(|pair| {
            let capture = |text: &str, polarity: char| -> Result<Vec<Vec<f64>>, PopulationError> {
                if tokenizer.encode(text).is_empty() {
                    return Err(PopulationError::EmptyPrompt {
                        record_id: pair.record_id(),
                        polarity,
                    });
                }
                let ids = tokenizer.encode_with_bos(text);
                let (_, trace) = model.forward_with_taps(&ids, None)?;
                Ok(layers
                    .layers()
                    .iter()
                    .map(|&k| trace.last(k).as_slice().to_vec())
                    .collect())
            };
            let pos = capture(&pair.positive, '+')?;
            let neg = capture(&pair.negative, '-')?;
            Ok(pos
                .iter()
                .zip(&neg)
                .map(|(p, n)| p.iter().zip(n).map(|(a, b)| a - b).collect())
                .collect())
        })
        .collect()
}

fn capture_from_dump(
    dump: &ActivationDump,
    set: &StimulusSet,
    layers: &LayerSelection,
) -> Result<Vec<Vec<Vec<f64>>>, PopulationError> {
    for &layer in layers.layers() {
        if !dump.layers.contains(&layer) {
            return Err(PopulationError::DumpMissingLayer { layer });
        }
    }
    set.pairs()
        .iter()
        .map(|pair| {
            let id = pair.record_id();
            let pos = dump
                .record(&id, Polarity::Positive)
                .ok_or_else(|| PopulationError::DumpMissingPrompt { id: id.clone(), polarity: '+' })?;
            let neg = dump
                .record(&id, Polarity::Negative)
                .ok_or_else(|| PopulationError::DumpMissingPrompt { id: id.clone(), polarity: '-' })?;
            layers
                .layers()
                .iter()
                .map(|&k| {
                    let p = pos.get(&k).ok_or(PopulationError::DumpMissingLayer { layer: k })?;
                    let n = neg.get(&k).ok_or(PopulationError::DumpMissingLayer { layer: k })?;
                    Ok(p.iter().zip(n).map(|(a, b)| a - b).collect())
                })
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn byte(self) -> u8 {
        match self {
            Self::Positive => b'+',
            Self::Negative => b'-',
        }
    }

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            b'+' => Some(Self::Positive),
            b'-' => Some(Self::Negative),
            _ => None,
        }
    }

    pub fn symbol(self) -> char {
        self.byte() as char
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpDtype {
    F64,
    F32,
}

/// One dump record: per-layer last-token activations for a prompt.
#[derive(Debug, Clone)]
pub struct DumpRecord {
    pub prompt_id: String,
    pub polarity: Polarity,
    pub activations: BTreeMap<usize, Vec<f64>>,
}

/// In-memory activation dump (interop with models hosted outside the
/// toolkit).
#[derive(Debug, Clone)]
pub struct ActivationDump {
    pub model_id: String,
    pub dim: usize,
    pub layers: Vec<usize>,
    pub dtype: DumpDtype,
    records: Vec<DumpRecord>,
    index: HashMap<(String, Polarity), usize>,
}

impl ActivationDump {
    pub fn new(
        model_id: String,
        dim: usize,
        layers: Vec<usize>,
        dtype: DumpDtype,
        records: Vec<DumpRecord>,
    ) -> Result<Self, PopulationError> {
        let mut index = HashMap::new();
        for (i, record) in records.iter().enumerate() {
            for (&layer, values) in &record.activations {
                if !layers.contains(&layer) {
                    return Err(PopulationError::DumpMissingLayer { layer });
                }
                if values.len() != dim {
                    return Err(PopulationError::DimensionMismatch {
                        dump: values.len(),
                        expected: dim,
                    });
                }
            }
            index.insert((record.prompt_id.clone(), record.polarity), i);
        }
        Ok(Self { model_id, dim, layers, dtype, records, index })
    }

    pub fn record(&self, id: &str, polarity: Polarity) -> Option<&BTreeMap<usize, Vec<f64>>> {
        self.index.get(&(id.to_string(), polarity)).map(|&i| &self.records[i].activations)
    }

    pub fn records(&self) -> &[DumpRecord] {
        &self.records
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), FormatError> {
        write_magic(w, DUMP_MAGIC)?;
        write_u32(w, DUMP_VERSION)?;
        write_string(w, &self.model_id)?;
        write_u32(w, self.dim as u32)?;
        write_u32(w, self.layers.len() as u32)?;
        for &layer in &self.layers {
            write_u32(w, layer as u32)?;
        }
        write_u32(w, self.records.len() as u32)?;
        write_u8(w, match self.dtype {
            DumpDtype::F64 => 0,
            DumpDtype::F32 => 1,
        })?;
        for record in &self.records {
            write_string(w, &record.prompt_id)?;
            write_u8(w, record.polarity.byte())?;
            for &layer in &self.layers {
                let values = record.activations.get(&layer).ok_or_else(|| {
                    FormatError::corrupt(format!(
                        "record {:?} lacks layer {layer}",
                        record.prompt_id
                    ))
                })?;
                match self.dtype {
                    DumpDtype::F64 => write_f64_slice(w, values)?,
                    DumpDtype::F32 => write_f32_slice(w, values)?,
                }
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, FormatError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<(), PopulationError> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| PopulationError::File(FormatError::Io(e)))?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, PopulationError> {
        expect_magic(r, DUMP_MAGIC)?;
        let version = read_u32(r)?;
        if version != DUMP_VERSION {
            return Err(FormatError::corrupt(format!("unsupported dump version {version}")).into());
        }
        let model_id = read_string(r)?;
        let dim = read_u32(r)? as usize;
        let layer_count = read_u32(r)? as usize;
        let mut layers = Vec::with_capacity(layer_count);
        for _ in 0..layer_count {
            layers.push(read_u32(r)? as usize);
        }
        let prompt_count = read_u32(r)? as usize;
        let dtype = match read_u8(r)? {
            0 => DumpDtype::F64,
            1 => DumpDtype::F32,
            other => {
                return Err(FormatError::corrupt(format!("bad dtype flag {other}")).into());
            }
        };
        let mut records = Vec::with_capacity(prompt_count);
        for _ in 0..prompt_count {
            let prompt_id = read_string(r)?;
            let polarity = Polarity::from_byte(read_u8(r)?)
                .ok_or_else(|| FormatError::corrupt("bad polarity byte"))?;
            let mut activations = BTreeMap::new();
            for &layer in &layers {
                let values = match dtype {
                    DumpDtype::F64 => read_f64_vec(r, dim)?,
                    DumpDtype::F32 => read_f32_vec_as_f64(r, dim)?,
                };
                activations.insert(layer, values);
            }
            records.push(DumpRecord { prompt_id, polarity, activations });
        }
        expect_eof(r)?;
        Self::new(model_id, dim, layers, dtype, records)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PopulationError> {
        Self::read_from(&mut Cursor::new(bytes))
    }

    pub fn load(path: &Path) -> Result<Self, PopulationError> {
        let bytes = fs::read(path).map_err(|e| PopulationError::File(FormatError::Io(e)))?;
        Self::from_bytes(&bytes)
    }
}

/// Reference dump writer for the toy model: forwards every prompt and
/// stores the last-token activations at the selected layers.
pub fn dump_from_model(
    model: &ToyTransformer,
    tokenizer: &Tokenizer,
    prompts: &[(String, Polarity, String)],
    layers: &LayerSelection,
    dtype: DumpDtype,
) -> Result<ActivationDump, PopulationError> {
    if layers.max_layer() > model.depth() {
        return Err(PopulationError::LayerOutOfRange {
            layer: layers.max_layer(),
            depth: model.depth(),
        });
    }
    let records: Vec<DumpRecord> = prompts
        .par_iter()
        .map(|(id, polarity, text)| {
            if tokenizer.encode(text).is_empty() {
                return Err(PopulationError::EmptyPrompt {
                    record_id: id.clone(),
                    polarity: polarity.symbol(),
                });
            }
            let ids = tokenizer.encode_with_bos(text);
            let (_, trace) = model.forward_with_taps(&ids, None)?;
            let mut activations = BTreeMap::new();
            for &k in layers.layers() {
                activations.insert(k, trace.last(k).as_slice().to_vec());
            }
            Ok(DumpRecord { prompt_id: id.clone(), polarity: *polarity, activations })
        })
        .collect::<Result<_, _>>()?;
    ActivationDump::new(
        model.model_id().to_string(),
        model.hidden_dim(),
        layers.layers().to_vec(),
        dtype,
        records,
    )
}

/// The dump a stimulus set would be captured from: one record per prompt,
/// ids matching [`crate::stimuli::PromptPair::record_id`].
pub fn dump_prompts_for_set(set: &StimulusSet) -> Vec<(String, Polarity, String)> {
    let mut prompts = Vec::with_capacity(set.pairs().len() * 2);
    for pair in set.pairs() {
        prompts.push((pair.record_id(), Polarity::Positive, pair.positive.clone()));
        prompts.push((pair.record_id(), Polarity::Negative, pair.negative.clone()));
    }
    prompts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::stimuli::{build_stimulus_set, Stimulus, TaskQuery, TemplateRegistry};

    fn toy_lexicon() -> Tokenizer {
        let mut lines =
            vec!["<bos>".to_string(), "<eos>".into(), "<unk>".into(), ".".into(), "?".into()];
        for w in ["USER", ":", "ASSISTANT", "question", "Let's", "think", "q1", "q2", "q3", "A"] {
            lines.push(w.into());
        }
        Tokenizer::from_lines(lines).unwrap()
    }

    fn model(tokenizer: &Tokenizer) -> ToyTransformer {
        let config = ModelConfig {
            layers: 6,
            hidden_dim: 16,
            heads: 2,
            vocab_size: tokenizer.vocab_size(),
            ..ModelConfig::default()
        };
        ToyTransformer::build(3, config).unwrap()
    }

    fn small_set(n: usize) -> StimulusSet {
        let queries: Vec<TaskQuery> = (0..n)
            .map(|i| TaskQuery {
                id: format!("q{}", i + 1),
                question: format!("question q{}?", i + 1),
                answer: "yes".into(),
                demonstrations: None,
            })
            .collect();
        let z = Stimulus::zero_shot("Let's think.").unwrap();
        build_stimulus_set(&queries, &[z], 1, &TemplateRegistry::builtin(), "chat").unwrap()
    }

    #[test]
    fn resolve_last_layers() {
        let sel = resolve_layers(&LayerSpec::Last(5), 32).unwrap();
        assert_eq!(sel.layers(), &[28, 29, 30, 31, 32]);
        let sel = resolve_layers(&LayerSpec::Last(1), 6).unwrap();
        assert_eq!(sel.layers(), &[6]);
    }

    #[test]
    fn resolve_rejects_out_of_range() {
        assert!(matches!(
            resolve_layers(&LayerSpec::Explicit(vec![2, 4, 9]), 8),
            Err(PopulationError::LayerOutOfRange { layer: 9, depth: 8 })
        ));
        assert!(matches!(
            resolve_layers(&LayerSpec::Last(7), 6),
            Err(PopulationError::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn layer_spec_parsing() {
        assert_eq!(LayerSpec::parse("last:5").unwrap(), LayerSpec::Last(5));
        assert_eq!(LayerSpec::parse("8,9,10").unwrap(), LayerSpec::Explicit(vec![8, 9, 10]));
        assert!(LayerSpec::parse("last:x").is_err());
        assert!(LayerSpec::parse("").is_err());
    }

    #[test]
    fn capture_shapes_follow_set() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(2);
        let layers = resolve_layers(&LayerSpec::Explicit(vec![5, 6]), m.depth()).unwrap();
        let pop = capture_population(
            &CaptureSource::Live { model: &m, tokenizer: &tok },
            &set,
            &layers,
        )
        .unwrap();
        assert_eq!(pop.layers(), vec![5, 6]);
        assert_eq!(pop.row_count(), 2);
        assert_eq!(pop.dim(), 16);
    }

    #[test]
    fn identical_pair_gives_zero_rows() {
        // Degenerate pair: positive text equals negative text.
        let tok = toy_lexicon();
        let m = model(&tok);
        let queries = vec![TaskQuery {
            id: "q1".into(),
            question: "question?".into(),
            answer: "yes".into(),
            demonstrations: None,
        }];
        let mut registry_map = std::collections::BTreeMap::new();
        // Layout without the stimulus placeholder: both polarities render
        // identically.
        registry_map.insert("flat".to_string(), "USER: {question}\nASSISTANT:".to_string());
        let registry = TemplateRegistry::new(registry_map);
        let z = Stimulus::zero_shot("ignored").unwrap();
        let set = build_stimulus_set(&queries, &[z], 1, &registry, "flat").unwrap();
        let layers = resolve_layers(&LayerSpec::Last(2), m.depth()).unwrap();
        let pop = capture_population(
            &CaptureSource::Live { model: &m, tokenizer: &tok },
            &set,
            &layers,
        )
        .unwrap();
        for (_, matrix) in pop.matrices() {
            for row in matrix.rows() {
                assert!(row.as_slice().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn swapping_polarity_negates_rows() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(2);
        let layers = resolve_layers(&LayerSpec::Last(3), m.depth()).unwrap();
        let live = CaptureSource::Live { model: &m, tokenizer: &tok };
        let pop = capture_population(&live, &set, &layers).unwrap();

        // Build a dump with polarities swapped and capture from it.
        let mut prompts = dump_prompts_for_set(&set);
        for p in &mut prompts {
            p.1 = match p.1 {
                Polarity::Positive => Polarity::Negative,
                Polarity::Negative => Polarity::Positive,
            };
        }
        let dump = dump_from_model(&m, &tok, &prompts, &layers, DumpDtype::F64).unwrap();
        let swapped = capture_population(&CaptureSource::Dump(&dump), &set, &layers).unwrap();
        for (layer, matrix) in pop.matrices() {
            let other = swapped.matrix(layer).unwrap();
            for (a, b) in matrix.rows().iter().zip(other.rows()) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    assert_eq!(*x, -*y);
                }
            }
        }
    }

    #[test]
    fn dump_round_trip_matches_live_exactly() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(3);
        let layers = resolve_layers(&LayerSpec::Last(5), m.depth()).unwrap();
        let live = capture_population(
            &CaptureSource::Live { model: &m, tokenizer: &tok },
            &set,
            &layers,
        )
        .unwrap();

        let prompts = dump_prompts_for_set(&set);
        let dump = dump_from_model(&m, &tok, &prompts, &layers, DumpDtype::F64).unwrap();
        let bytes = dump.to_bytes().unwrap();
        let reloaded = ActivationDump::from_bytes(&bytes).unwrap();
        let from_dump =
            capture_population(&CaptureSource::Dump(&reloaded), &set, &layers).unwrap();

        for (layer, matrix) in live.matrices() {
            let other = from_dump.matrix(layer).unwrap();
            for (a, b) in matrix.rows().iter().zip(other.rows()) {
                for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
                    assert!((x - y).abs() <= 1e-9);
                }
            }
        }
        assert_eq!(live.digest(), from_dump.digest());
    }

    #[test]
    fn f32_dump_loses_only_storage_precision() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(1);
        let layers = resolve_layers(&LayerSpec::Last(1), m.depth()).unwrap();
        let prompts = dump_prompts_for_set(&set);
        let dump = dump_from_model(&m, &tok, &prompts, &layers, DumpDtype::F32).unwrap();
        let reloaded = ActivationDump::from_bytes(&dump.to_bytes().unwrap()).unwrap();
        let live = capture_population(
            &CaptureSource::Live { model: &m, tokenizer: &tok },
            &set,
            &layers,
        )
        .unwrap();
        let from_dump =
            capture_population(&CaptureSource::Dump(&reloaded), &set, &layers).unwrap();
        let a = live.matrix(6).unwrap().rows()[0].as_slice();
        let b = from_dump.matrix(6).unwrap().rows()[0].as_slice();
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-5, "f32 storage error only: {x} vs {y}");
        }
    }

    #[test]
    fn dump_missing_prompt_is_reported() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(2);
        let layers = resolve_layers(&LayerSpec::Last(1), m.depth()).unwrap();
        let mut prompts = dump_prompts_for_set(&set);
        prompts.pop();
        let dump = dump_from_model(&m, &tok, &prompts, &layers, DumpDtype::F64).unwrap();
        assert!(matches!(
            capture_population(&CaptureSource::Dump(&dump), &set, &layers),
            Err(PopulationError::DumpMissingPrompt { .. })
        ));
    }

    #[test]
    fn dump_missing_layer_is_reported() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(1);
        let dumped = resolve_layers(&LayerSpec::Explicit(vec![6]), m.depth()).unwrap();
        let wanted = resolve_layers(&LayerSpec::Explicit(vec![5, 6]), m.depth()).unwrap();
        let prompts = dump_prompts_for_set(&set);
        let dump = dump_from_model(&m, &tok, &prompts, &dumped, DumpDtype::F64).unwrap();
        assert!(matches!(
            capture_population(&CaptureSource::Dump(&dump), &set, &wanted),
            Err(PopulationError::DumpMissingLayer { layer: 5 })
        ));
    }

    #[test]
    fn truncated_dump_is_corrupt() {
        let tok = toy_lexicon();
        let m = model(&tok);
        let set = small_set(1);
        let layers = resolve_layers(&LayerSpec::Last(1), m.depth()).unwrap();
        let dump =
            dump_from_model(&m, &tok, &dump_prompts_for_set(&set), &layers, DumpDtype::F64)
                .unwrap();
        let mut bytes = dump.to_bytes().unwrap();
        bytes.truncate(bytes.len() - 7);
        assert!(matches!(
            ActivationDump::from_bytes(&bytes),
            Err(PopulationError::File(FormatError::Corrupt(_)))
        ));
    }
}
