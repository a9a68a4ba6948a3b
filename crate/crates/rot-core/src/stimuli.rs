//! Contrastive stimulus corpus construction: positive/negative prompt pairs
//! for zero-shot and few-shot CoT, plus query selection.
//!
//! A positive prompt carries the stimulus (an instruction like "Let's think
//! step by step." or a block of worked demonstrations); the negative prompt
//! is the same template with the stimulus left out, so the string diff
//! between the two is confined to the stimulus insertion region. Explicitly
//! negative instructions are never rendered.

use std::collections::{BTreeMap, HashSet};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{ModelError, Tokenizer, ToyTransformer};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum StimuliError {
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("need {needed} stimuli, only {available} available")]
    InsufficientStimuli { available: usize, needed: usize },
    #[error("requested {requested} queries, task has {available}")]
    NotEnoughSamples { available: usize, requested: usize },
    #[error("invalid stimulus: {0}")]
    InvalidStimulus(String),
    #[error("a stimulus set must use a single stimulus kind")]
    MixedStimulusKinds,
    #[error("task file invalid: {0}")]
    TaskFileInvalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StimulusKind {
    ZeroShot,
    FewShot,
}

impl StimulusKind {
    pub fn label(self) -> &'static str {
        match self {
            Self::ZeroShot => "zero_shot",
            Self::FewShot => "few_shot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct Demonstration {
    pub q: String,
    pub a: String,
}

/// A CoT trigger: an instruction (zero-shot) or worked examples (few-shot).
#[derive(Debug, Clone, PartialEq)]
pub enum Stimulus {
    ZeroShot { instruction: String },
    FewShot { demonstrations: Vec<Demonstration> },
}

impl Stimulus {
    pub fn zero_shot(instruction: impl Into<String>) -> Result<Self, StimuliError> {
        let instruction = instruction.into();
        if instruction.trim().is_empty() {
            return Err(StimuliError::InvalidStimulus("empty instruction".into()));
        }
        Ok(Self::ZeroShot { instruction })
    }

    pub fn few_shot(demonstrations: Vec<Demonstration>) -> Result<Self, StimuliError> {
        if demonstrations.is_empty() {
            return Err(StimuliError::InvalidStimulus("few-shot needs >= 1 demonstration".into()));
        }
        for d in &demonstrations {
            if d.q.trim().is_empty() || d.a.trim().is_empty() {
                return Err(StimuliError::InvalidStimulus(
                    "demonstration query and answer must be nonempty".into(),
                ));
            }
        }
        Ok(Self::FewShot { demonstrations })
    }

    /// Few-shot stimulus with the demonstration order shuffled (the
    /// demonstration-order robustness variant).
    pub fn few_shot_shuffled(
        mut demonstrations: Vec<Demonstration>,
        seed: u64,
    ) -> Result<Self, StimuliError> {
        SplitMix64::new(seed).shuffle(&mut demonstrations);
        Self::few_shot(demonstrations)
    }

    pub fn kind(&self) -> StimulusKind {
        match self {
            Self::ZeroShot { .. } => StimulusKind::ZeroShot,
            Self::FewShot { .. } => StimulusKind::FewShot,
        }
    }
}

/// template_id -> layout string with `{demos}`, `{question}`, `{stimulus}`
/// placeholders. Loaded from a JSON object file.
#[derive(Debug, Clone)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, String>,
}

pub const DEFAULT_TEMPLATE_ID: &str = "chat";

impl TemplateRegistry {
    pub fn new(templates: BTreeMap<String, String>) -> Self {
        Self { templates }
    }

    /// The bundled layout: `USER: {demos}{question}\nASSISTANT:{stimulus}`.
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        templates.insert(
            DEFAULT_TEMPLATE_ID.to_string(),
            "USER: {demos}{question}\nASSISTANT:{stimulus}".to_string(),
        );
        Self { templates }
    }

    pub fn from_json_str(text: &str) -> Result<Self, StimuliError> {
        let templates: BTreeMap<String, String> = serde_json::from_str(text)
            .map_err(|e| StimuliError::TaskFileInvalid(format!("template registry: {e}")))?;
        Ok(Self { templates })
    }

    pub fn layout(&self, template_id: &str) -> Result<&str, StimuliError> {
        self.templates
            .get(template_id)
            .map(String::as_str)
            .ok_or_else(|| StimuliError::UnknownTemplate(template_id.to_string()))
    }
}

/// Expand a template. `stimulus = None` renders the negative (or base)
/// prompt: same layout, stimulus region empty. Few-shot questions carry the
/// `Q:` prefix of the demonstration blocks in both polarities, so a pair
/// differs only by the serialized demonstrations.
pub fn render_prompt(
    registry: &TemplateRegistry,
    template_id: &str,
    kind: StimulusKind,
    stimulus: Option<&Stimulus>,
    query: &str,
) -> Result<String, StimuliError> {
    let layout = registry.layout(template_id)?;
    if let Some(s) = stimulus {
        if s.kind() != kind {
            return Err(StimuliError::InvalidStimulus(format!(
                "stimulus kind {} does not match requested {}",
                s.kind().label(),
                kind.label()
            )));
        }
    }
    let question_text = match kind {
        StimulusKind::ZeroShot => query.to_string(),
        StimulusKind::FewShot => format!("Q: {query}"),
    };
    let demos_text = match stimulus {
        Some(Stimulus::FewShot { demonstrations }) => {
            let blocks: Vec<String> =
                demonstrations.iter().map(|d| format!("Q: {}\nA: {}", d.q, d.a)).collect();
            format!("{}\n\n", blocks.join("\n\n"))
        }
        _ => String::new(),
    };
    let stimulus_text = match stimulus {
        Some(Stimulus::ZeroShot { instruction }) => format!(" {instruction}"),
        _ => String::new(),
    };
    Ok(layout
        .replace("{demos}", &demos_text)
        .replace("{question}", &question_text)
        .replace("{stimulus}", &stimulus_text))
}

/// One query from a task file.
#[derive(Debug, Clone, Deserialize)]
pub struct TaskQuery {
    pub id: String,
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub demonstrations: Option<Vec<Demonstration>>,
}

/// Parse a JSON-lines task file; ids must be unique and fields nonempty.
pub fn load_task_jsonl(text: &str) -> Result<Vec<TaskQuery>, StimuliError> {
    let mut queries = Vec::new();
    let mut seen = HashSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: TaskQuery = serde_json::from_str(line)
            .map_err(|e| StimuliError::TaskFileInvalid(format!("line {}: {e}", lineno + 1)))?;
        if q.id.is_empty() || q.question.trim().is_empty() {
            return Err(StimuliError::TaskFileInvalid(format!(
                "line {}: id and question must be nonempty",
                lineno + 1
            )));
        }
        if !seen.insert(q.id.clone()) {
            return Err(StimuliError::TaskFileInvalid(format!("duplicate id {:?}", q.id)));
        }
        queries.push(q);
    }
    if queries.is_empty() {
        return Err(StimuliError::TaskFileInvalid("task file has no records".into()));
    }
    Ok(queries)
}

/// Parse a JSON-lines demonstrations file (`{"q": ..., "a": ...}` records).
pub fn load_demos_jsonl(text: &str) -> Result<Vec<Demonstration>, StimuliError> {
    let mut demos = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let d: Demonstration = serde_json::from_str(line)
            .map_err(|e| StimuliError::TaskFileInvalid(format!("line {}: {e}", lineno + 1)))?;
        demos.push(d);
    }
    if demos.is_empty() {
        return Err(StimuliError::TaskFileInvalid("demonstrations file has no records".into()));
    }
    Ok(demos)
}

#[derive(Debug, Clone, Copy)]
pub enum SelectionStrategy {
    Random { seed: u64 },
    LowPerplexity,
    HighPerplexity,
}

/// Perplexity source for the selection strategies; implemented by the toy
/// model and by test stubs.
pub trait PerplexityScorer {
    fn perplexity_of(&self, text: &str) -> Result<f64, ModelError>;
}

pub struct ModelScorer<'a> {
    pub model: &'a ToyTransformer,
    pub tokenizer: &'a Tokenizer,
}

impl PerplexityScorer for ModelScorer<'_> {
    fn perplexity_of(&self, text: &str) -> Result<f64, ModelError> {
        self.model.perplexity(&self.tokenizer.encode_with_bos(text))
    }
}

/// Pick exactly `n` queries. Perplexity strategies rank the bare question
/// text and take the top/bottom `n` (ties by id ascending); the result is
/// always returned in ascending id order.
pub fn select_queries(
    queries: &[TaskQuery],
    n: usize,
    strategy: SelectionStrategy,
    scorer: Option<&dyn PerplexityScorer>,
) -> Result<Vec<TaskQuery>, StimuliError> {
    if n == 0 || queries.len() < n {
        return Err(StimuliError::NotEnoughSamples { available: queries.len(), requested: n });
    }
    let mut selected: Vec<TaskQuery> = match strategy {
        SelectionStrategy::Random { seed } => {
            let mut indices: Vec<usize> = (0..queries.len()).collect();
            SplitMix64::new(seed).shuffle(&mut indices);
            indices.truncate(n);
            indices.into_iter().map(|i| queries[i].clone()).collect()
        }
        SelectionStrategy::LowPerplexity | SelectionStrategy::HighPerplexity => {
            let scorer = scorer.ok_or_else(|| {
                StimuliError::InvalidStimulus("perplexity selection needs a model".into())
            })?;
            let mut scored: Vec<(f64, &TaskQuery)> = Vec::with_capacity(queries.len());
            for q in queries {
                scored.push((scorer.perplexity_of(&q.question)?, q));
            }
            scored.sort_by(|(pa, qa), (pb, qb)| {
                let ord = pa.partial_cmp(pb).expect("perplexities are finite");
                let ord = match strategy {
                    SelectionStrategy::HighPerplexity => ord.reverse(),
                    _ => ord,
                };
                ord.then_with(|| qa.id.cmp(&qb.id))
            });
            scored.into_iter().take(n).map(|(_, q)| q.clone()).collect()
        }
    };
    selected.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(selected)
}

/// One contrastive pair: the rendered positive and negative prompts for a
/// query under one stimulus.
#[derive(Debug, Clone)]
pub struct PromptPair {
    pub query_id: String,
    pub stimulus_index: usize,
    pub positive: String,
    pub negative: String,
    pub template_id: String,
}

impl PromptPair {
    /// Stable record id for dump files: `query_id/stimulus_index`.
    pub fn record_id(&self) -> String {
        format!("{}/{}", self.query_id, self.stimulus_index)
    }
}

/// The full corpus: N queries x M stimuli, pairs grouped per query.
#[derive(Debug, Clone)]
pub struct StimulusSet {
    pairs: Vec<PromptPair>,
    query_count: usize,
    stimulus_count: usize,
    kind: StimulusKind,
    template_id: String,
}

impl StimulusSet {
    pub fn pairs(&self) -> &[PromptPair] {
        &self.pairs
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    pub fn stimulus_count(&self) -> usize {
        self.stimulus_count
    }

    pub fn kind(&self) -> StimulusKind {
        self.kind
    }

    pub fn template_id(&self) -> &str {
        &self.template_id
    }

    /// SHA-256 over (ordered) pair ids and texts; ties population
    /// provenance to the exact corpus.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for pair in &self.pairs {
            hasher.update(pair.record_id().as_bytes());
            hasher.update([0]);
            hasher.update(pair.positive.as_bytes());
            hasher.update([0]);
            hasher.update(pair.negative.as_bytes());
            hasher.update([0]);
        }
        let digest = hasher.finalize();
        digest[..12].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Build the pair corpus: per query, one pair for each of the first `m`
/// stimuli, in (query order, stimulus index) order.
pub fn build_stimulus_set(
    queries: &[TaskQuery],
    stimuli: &[Stimulus],
    m: usize,
    registry: &TemplateRegistry,
    template_id: &str,
) -> Result<StimulusSet, StimuliError> {
    if queries.is_empty() {
        return Err(StimuliError::NotEnoughSamples { available: 0, requested: 1 });
    }
    if m == 0 || stimuli.len() < m {
        return Err(StimuliError::InsufficientStimuli { available: stimuli.len(), needed: m });
    }
    let kind = stimuli[0].kind();
    if stimuli[..m].iter().any(|s| s.kind() != kind) {
        return Err(StimuliError::MixedStimulusKinds);
    }
    let mut pairs = Vec::with_capacity(queries.len() * m);
    for query in queries {
        for (index, stimulus) in stimuli[..m].iter().enumerate() {
            let positive =
                render_prompt(registry, template_id, kind, Some(stimulus), &query.question)?;
            let negative = render_prompt(registry, template_id, kind, None, &query.question)?;
            pairs.push(PromptPair {
                query_id: query.id.clone(),
                stimulus_index: index,
                positive,
                negative,
                template_id: template_id.to_string(),
            });
        }
    }
    Ok(StimulusSet {
        pairs,
        query_count: queries.len(),
        stimulus_count: m,
        kind,
        template_id: template_id.to_string(),
    })
}
