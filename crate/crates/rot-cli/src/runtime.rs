//! Shared command plumbing: tokenizer/model/registry construction, task and
//! demonstration loading, stimulus variant assembly.

use std::path::Path;

use rot_core::eval::TaskKind;
use rot_core::fixtures;
use rot_core::model::{ModelConfig, Tokenizer, ToyTransformer};
use rot_core::stimuli::{
    load_demos_jsonl, load_task_jsonl, Demonstration, Stimulus, TaskQuery, TemplateRegistry,
};

use crate::config::RunConfig;
use crate::errors::{CliError, CliResult};

pub struct Toolkit {
    pub tokenizer: Tokenizer,
    pub model: ToyTransformer,
    pub registry: TemplateRegistry,
}

pub fn load_toolkit(cfg: &RunConfig) -> CliResult<Toolkit> {
    let tokenizer = match &cfg.lexicon_path {
        Some(path) => Tokenizer::load(path)?,
        None => fixtures::tokenizer(),
    };
    let model = match &cfg.model_path {
        Some(path) => {
            let model = ToyTransformer::load(path).map_err(|e| match e {
                rot_core::model::ModelError::File(rot_core::format::FormatError::Io(io))
                    if io.kind() == std::io::ErrorKind::NotFound =>
                {
                    CliError::from_io(path, io)
                }
                other => other.into(),
            })?;
            if model.vocab_size() != tokenizer.vocab_size() {
                return Err(CliError::new(
                    crate::errors::EXIT_MISMATCH,
                    format!(
                        "model vocabulary {} does not match lexicon {}",
                        model.vocab_size(),
                        tokenizer.vocab_size()
                    ),
                ));
            }
            model
        }
        None => {
            let config = ModelConfig { vocab_size: tokenizer.vocab_size(), ..ModelConfig::default() };
            ToyTransformer::build(cfg.model_seed(), config)?
        }
    };
    let registry = match &cfg.templates_path {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?;
            TemplateRegistry::from_json_str(&text)?
        }
        None => fixtures::template_registry()?,
    };
    Ok(Toolkit { tokenizer, model, registry })
}

pub struct LoadedTask {
    pub name: String,
    pub queries: Vec<TaskQuery>,
    /// Known answer kind (always set for bundled tasks).
    pub kind: Option<TaskKind>,
    /// Default demonstration set for few-shot stimuli.
    pub demos: Vec<Demonstration>,
}

/// Resolve `--task`: a bundled name or a JSON-lines path. Demonstrations
/// come from `--demos`, else the bundled set, else the first task record
/// carrying a `demonstrations` field.
pub fn load_task(cfg: &RunConfig) -> CliResult<LoadedTask> {
    let spec = cfg
        .task
        .as_deref()
        .ok_or_else(|| CliError::config("a task is required (--task NAME_OR_PATH)"))?;
    let mut task = match fixtures::toy_task(spec) {
        Some(toy) => LoadedTask {
            name: toy.name.to_string(),
            queries: toy.queries,
            kind: Some(toy.kind),
            demos: toy.demos,
        },
        None => {
            let path = Path::new(spec);
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?;
            let queries = load_task_jsonl(&text)?;
            let demos = queries
                .iter()
                .find_map(|q| q.demonstrations.clone())
                .unwrap_or_default();
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            LoadedTask { name, queries, kind: None, demos }
        }
    };
    if let Some(path) = &cfg.demos_path {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?;
        task.demos = load_demos_jsonl(&text)?;
    }
    Ok(task)
}

/// Zero-shot variants are the bundled instructions; few-shot variants are
/// the demonstration set in original order followed by seeded shuffles.
pub fn stimulus_variants(
    cfg: &RunConfig,
    demos: &[Demonstration],
    count: usize,
) -> CliResult<Vec<Stimulus>> {
    match cfg.stimuli_kind {
        rot_core::stimuli::StimulusKind::ZeroShot => {
            let all = fixtures::zero_shot_stimuli()?;
            if all.len() < count {
                return Err(CliError::config(format!(
                    "need {count} zero-shot stimuli, only {} bundled",
                    all.len()
                )));
            }
            Ok(all.into_iter().take(count).collect())
        }
        rot_core::stimuli::StimulusKind::FewShot => {
            if demos.is_empty() {
                return Err(CliError::config(
                    "few-shot stimuli need demonstrations (--demos or a bundled task)",
                ));
            }
            let mut variants = vec![Stimulus::few_shot(demos.to_vec())?];
            for j in 1..count {
                variants.push(Stimulus::few_shot_shuffled(
                    demos.to_vec(),
                    cfg.demo_shuffle_seed(j),
                )?);
            }
            Ok(variants)
        }
    }
}

/// Decode generated ids, dropping a trailing `<eos>`.
pub fn response_text(tokenizer: &Tokenizer, tokens: &[u32]) -> CliResult<String> {
    let trimmed: &[u32] = match tokens.last() {
        Some(&last) if last == tokenizer.eos_id() => &tokens[..tokens.len() - 1],
        _ => tokens,
    };
    Ok(tokenizer.decode(trimmed)?)
}
