//! Subcommand implementations. Every command is deterministic given the
//! config and seeds; artifacts re-written from the same inputs are
//! byte-identical.

use std::fs;
use std::path::Path;

use rot_core::control::{save_policy, steered_generate, SteeringPolicy};
use rot_core::eval::{
    load_accuracy_groups, robustness_score, BenchmarkSpec, Condition, ExtractionTemplate,
    ModelResponder, TaskKind,
};
use rot_core::fixtures;
use rot_core::localization::{localize, render_report, score_prefixes, ReportFormat};
use rot_core::model::{FinalNorm, ModelConfig, ToyTransformer};
use rot_core::populations::{
    capture_population, dump_from_model, dump_prompts_for_set, resolve_layers, ActivationDump,
    CaptureSource, DumpDtype, Polarity,
};
use rot_core::reading::{
    export_text, extract_reading_vectors, load_reading_vectors, save_reading_vectors,
    ReadingVectorSet,
};
use rot_core::rng::{subseed, SplitMix64};
use rot_core::stimuli::{build_stimulus_set, select_queries, ModelScorer, SelectionStrategy};
use rot_core::Vector;
use serde::Deserialize;

use crate::config::{FormatChoice, RunConfig};
use crate::errors::{CliError, CliResult};
use crate::runtime::{load_task, load_toolkit, response_text, stimulus_variants, Toolkit};

fn ensure_out_dir(cfg: &RunConfig) -> CliResult<()> {
    fs::create_dir_all(&cfg.out).map_err(|e| CliError::from_io(&cfg.out, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::from_io(path, e))
}

fn load_readers(path: &Path) -> CliResult<ReadingVectorSet> {
    if !path.exists() {
        return Err(CliError::from_io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    Ok(load_reading_vectors(path)?)
}

/// Build the stimulus set the `read` and `dump` commands share.
fn build_corpus(
    cfg: &RunConfig,
    toolkit: &Toolkit,
) -> CliResult<rot_core::stimuli::StimulusSet> {
    let task = load_task(cfg)?;
    let strategy = cfg.selection_strategy();
    let scorer = ModelScorer { model: &toolkit.model, tokenizer: &toolkit.tokenizer };
    let needs_model = !matches!(strategy, SelectionStrategy::Random { .. });
    let selected = select_queries(
        &task.queries,
        cfg.n_samples,
        strategy,
        needs_model.then_some(&scorer as &dyn rot_core::stimuli::PerplexityScorer),
    )?;
    let stimuli = stimulus_variants(cfg, &task.demos, cfg.m)?;
    Ok(build_stimulus_set(&selected, &stimuli, cfg.m, &toolkit.registry, &cfg.template)?)
}

/// capture -> PCA -> ROTV file, printing per-layer explained variance.
pub fn cmd_read(cfg: &RunConfig, dump: Option<&Path>, export: bool) -> CliResult<()> {
    let toolkit = load_toolkit(cfg)?;
    let set = build_corpus(cfg, &toolkit)?;
    let layers = resolve_layers(&cfg.layers, toolkit.model.depth())?;
    let loaded_dump = match dump {
        Some(path) => Some(ActivationDump::load(path).map_err(|e| match e {
            rot_core::populations::PopulationError::File(rot_core::format::FormatError::Io(io))
                if io.kind() == std::io::ErrorKind::NotFound =>
            {
                CliError::from_io(path, io)
            }
            other => other.into(),
        })?),
        None => None,
    };
    let source = match &loaded_dump {
        Some(d) => CaptureSource::Dump(d),
        None => CaptureSource::Live { model: &toolkit.model, tokenizer: &toolkit.tokenizer },
    };
    let population = capture_population(&source, &set, &layers)?;
    let readers = extract_reading_vectors(&population, cfg.center)?;

    ensure_out_dir(cfg)?;
    let out_path = cfg.out.join("vectors.rotv");
    save_reading_vectors(&readers, &out_path)?;
    if export {
        write_file(&cfg.out.join("vectors.txt"), export_text(&readers).as_bytes())?;
    }

    println!("captured {} pairs x {} layers", population.row_count(), layers.layers().len());
    for layer in readers.layers() {
        let share = readers.explained_share(layer).unwrap_or(0.0);
        println!("layer {layer}: explained variance share {share:.4}");
    }
    println!("population digest {}", readers.provenance.population_digest);
    println!("wrote {}", out_path.display());
    Ok(())
}

#[derive(Debug, Deserialize)]
struct PromptRecord {
    id: String,
    polarity: String,
    text: String,
}

/// Write a ROTD activation dump for the stimulus corpus or an explicit
/// prompts file.
pub fn cmd_dump(cfg: &RunConfig, prompts_file: Option<&Path>, dtype: &str) -> CliResult<()> {
    let dtype = match dtype {
        "f64" => DumpDtype::F64,
        "f32" => DumpDtype::F32,
        other => return Err(CliError::config(format!("unknown dtype {other:?}"))),
    };
    let toolkit = load_toolkit(cfg)?;
    let layers = resolve_layers(&cfg.layers, toolkit.model.depth())?;
    let prompts: Vec<(String, Polarity, String)> = match prompts_file {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?;
            let mut prompts = Vec::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let record: PromptRecord = serde_json::from_str(line).map_err(|e| {
                    CliError::data(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
                let polarity = match record.polarity.as_str() {
                    "+" => Polarity::Positive,
                    "-" => Polarity::Negative,
                    other => {
                        return Err(CliError::data(format!(
                            "{}:{}: bad polarity {other:?}",
                            path.display(),
                            lineno + 1
                        )))
                    }
                };
                prompts.push((record.id, polarity, record.text));
            }
            prompts
        }
        None => dump_prompts_for_set(&build_corpus(cfg, &toolkit)?),
    };
    let dump = dump_from_model(&toolkit.model, &toolkit.tokenizer, &prompts, &layers, dtype)?;
    ensure_out_dir(cfg)?;
    let out_path = cfg.out.join("activations.rotd");
    dump.save(&out_path)?;
    println!(
        "dumped {} records x {} layers to {}",
        dump.records().len(),
        layers.layers().len(),
        out_path.display()
    );
    Ok(())
}

/// Plain greedy generation (the unsteered baseline).
pub fn cmd_generate(cfg: &RunConfig, prompt: &str) -> CliResult<()> {
    let toolkit = load_toolkit(cfg)?;
    let ids = toolkit.tokenizer.encode_with_bos(prompt);
    let tokens = toolkit.model.generate(
        &ids,
        cfg.max_new_tokens,
        Some(toolkit.tokenizer.eos_id()),
        None,
    )?;
    println!("{}", response_text(&toolkit.tokenizer, &tokens)?);
    Ok(())
}

/// Score a response against the reading vectors and write salience reports.
pub fn cmd_localize(
    cfg: &RunConfig,
    readers_path: &Path,
    prompt: &str,
    response: Option<&str>,
) -> CliResult<()> {
    let toolkit = load_toolkit(cfg)?;
    let readers = load_readers(readers_path)?;
    let prompt_ids = toolkit.tokenizer.encode_with_bos(prompt);
    let response_ids = match response {
        Some(text) => toolkit.tokenizer.encode(text),
        None => {
            let tokens = toolkit.model.generate(
                &prompt_ids,
                cfg.max_new_tokens,
                Some(toolkit.tokenizer.eos_id()),
                None,
            )?;
            match tokens.last() {
                Some(&last) if last == toolkit.tokenizer.eos_id() => {
                    tokens[..tokens.len() - 1].to_vec()
                }
                _ => tokens,
            }
        }
    };
    if response_ids.is_empty() {
        return Err(CliError::data("response is empty after tokenization"));
    }
    let scores = score_prefixes(&toolkit.model, &prompt_ids, &response_ids, &readers, cfg.delta)?;
    let tokens: Vec<String> = response_ids
        .iter()
        .map(|&id| toolkit.tokenizer.token(id).unwrap_or("<unk>").to_string())
        .collect();
    let report = localize(&scores, prompt, &tokens)?;

    ensure_out_dir(cfg)?;
    let mut written = Vec::new();
    let targets: &[(ReportFormat, &str)] = match cfg.format {
        FormatChoice::Tsv => &[(ReportFormat::Tsv, "report.tsv")],
        FormatChoice::Ansi => &[(ReportFormat::Ansi, "report.txt")],
        FormatChoice::Html => &[(ReportFormat::Html, "report.html")],
        FormatChoice::All => &[
            (ReportFormat::Tsv, "report.tsv"),
            (ReportFormat::Ansi, "report.txt"),
            (ReportFormat::Html, "report.html"),
        ],
    };
    for (format, name) in targets {
        let path = cfg.out.join(name);
        write_file(&path, render_report(&report, *format).as_bytes())?;
        written.push(path);
    }

    let marked = report.marked_indices();
    println!("scored {} tokens, {} marked", report.entries.len(), marked.len());
    for i in marked {
        println!(
            "reasoning error at token {}: {:?} (score {:.4})",
            i + 1,
            report.entries[i].token,
            report.entries[i].score
        );
    }
    for path in written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

/// Steered generation with per-layer diagnostics.
pub fn cmd_steer(
    cfg: &RunConfig,
    readers_path: &Path,
    prompt: &str,
    export_policy: Option<&Path>,
) -> CliResult<()> {
    let toolkit = load_toolkit(cfg)?;
    let readers = load_readers(readers_path)?;
    let policy = SteeringPolicy::new(readers, cfg.alpha, cfg.sign)?;
    if let Some(path) = export_policy {
        save_policy(&policy, path)?;
        println!("wrote {}", path.display());
    }
    let prompt_ids = toolkit.tokenizer.encode_with_bos(prompt);
    let (tokens, diagnostics) = steered_generate(
        &toolkit.model,
        &prompt_ids,
        &policy,
        cfg.max_new_tokens,
        Some(toolkit.tokenizer.eos_id()),
    )?;
    for (layer, alpha) in &diagnostics.alphas {
        let projection = diagnostics.projections.get(layer).copied().unwrap_or(0.0);
        println!("layer {layer}: alpha {alpha:+.4} (prompt projection {projection:+.4})");
    }
    println!("{}", response_text(&toolkit.tokenizer, &tokens)?);
    Ok(())
}

fn parse_conditions(text: &str, zero_count: usize, few_count: usize) -> CliResult<Vec<Condition>> {
    let mut conditions = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let expand =
            |count: usize, make: fn(usize) -> Condition| (0..count).map(make).collect::<Vec<_>>();
        let parsed: Vec<Condition> = match part {
            "base" => vec![Condition::Base],
            "cot_z" => expand(zero_count, Condition::CotZero),
            "rot_z" => expand(zero_count, Condition::RotZero),
            "cot_f" => expand(few_count, Condition::CotFew),
            "rot_f" => expand(few_count, Condition::RotFew),
            specific => {
                let (make, rest): (fn(usize) -> Condition, &str) =
                    if let Some(rest) = specific.strip_prefix("cot_z") {
                        (Condition::CotZero, rest)
                    } else if let Some(rest) = specific.strip_prefix("rot_z") {
                        (Condition::RotZero, rest)
                    } else if let Some(rest) = specific.strip_prefix("cot_f") {
                        (Condition::CotFew, rest)
                    } else if let Some(rest) = specific.strip_prefix("rot_f") {
                        (Condition::RotFew, rest)
                    } else {
                        return Err(CliError::config(format!("unknown condition {part:?}")));
                    };
                let index: usize = rest
                    .parse()
                    .map_err(|_| CliError::config(format!("unknown condition {part:?}")))?;
                if index == 0 {
                    return Err(CliError::config("condition variants are numbered from 1"));
                }
                vec![make(index - 1)]
            }
        };
        conditions.extend(parsed);
    }
    if conditions.is_empty() {
        return Err(CliError::config("no conditions given"));
    }
    Ok(conditions)
}

/// Benchmark runner: accuracy per condition, robustness across variants,
/// summary and record logs.
#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    cfg: &RunConfig,
    conditions_text: &str,
    readers_path: Option<&Path>,
    readers_few_path: Option<&Path>,
    task_kind_flag: Option<&str>,
    limit: Option<usize>,
) -> CliResult<()> {
    let toolkit = load_toolkit(cfg)?;
    let task = load_task(cfg)?;
    let kind = match task_kind_flag {
        Some(text) => TaskKind::parse(text)
            .ok_or_else(|| CliError::config(format!("unknown task kind {text:?}")))?,
        None => task.kind.ok_or_else(|| {
            CliError::config("task kind unknown; pass --task-kind for custom task files")
        })?,
    };

    let zero_variants = fixtures::zero_shot_stimuli()?;
    let mut few_variants = Vec::new();
    if !task.demos.is_empty() {
        few_variants.push(rot_core::stimuli::Stimulus::few_shot(task.demos.clone())?);
        few_variants.push(rot_core::stimuli::Stimulus::few_shot_shuffled(
            task.demos.clone(),
            cfg.demo_shuffle_seed(1),
        )?);
    }
    let conditions = parse_conditions(conditions_text, zero_variants.len(), few_variants.len().max(2))?;

    let make_policy = |path: Option<&Path>| -> CliResult<Option<SteeringPolicy>> {
        match path {
            Some(p) => {
                let readers = load_readers(p)?;
                Ok(Some(SteeringPolicy::new(readers, cfg.alpha, cfg.sign)?))
            }
            None => Ok(None),
        }
    };
    let zero_policy = make_policy(readers_path)?;
    let few_policy = match readers_few_path {
        Some(_) => make_policy(readers_few_path)?,
        None => zero_policy.clone(),
    };

    let queries: Vec<rot_core::stimuli::TaskQuery> = {
        let mut sorted = task.queries.clone();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        match limit {
            Some(n) => sorted.into_iter().take(n).collect(),
            None => sorted,
        }
    };
    if queries.is_empty() {
        return Err(CliError::data("no queries to evaluate"));
    }

    let spec = BenchmarkSpec {
        task_name: task.name.clone(),
        queries: &queries,
        registry: &toolkit.registry,
        template_id: cfg.template.clone(),
        zero_variants,
        few_variants,
        extraction: ExtractionTemplate::builtin(kind),
        max_new_tokens: cfg.max_new_tokens,
        conditions,
        zero_policy,
        few_policy,
    };
    let responder = ModelResponder { model: &toolkit.model, tokenizer: &toolkit.tokenizer };
    let outcome = rot_core::eval::run_benchmark(&spec, &responder)?;

    ensure_out_dir(cfg)?;
    let mut summary_text = String::new();
    for row in &outcome.summary {
        summary_text.push_str(&serde_json::to_string(row).expect("summary serializes"));
        summary_text.push('\n');
    }
    let summary_path = cfg.out.join("summary.jsonl");
    write_file(&summary_path, summary_text.as_bytes())?;
    let mut records_text = String::new();
    for record in &outcome.records {
        records_text.push_str(&serde_json::to_string(record).expect("record serializes"));
        records_text.push('\n');
    }
    let records_path = cfg.out.join("records.jsonl");
    write_file(&records_path, records_text.as_bytes())?;

    for row in &outcome.summary {
        match row.robustness {
            Some(r) => println!(
                "{:10} {:12} accuracy {:6.2}  robustness {:.2}",
                row.condition, row.task, row.accuracy, r
            ),
            None => {
                println!("{:10} {:12} accuracy {:6.2}", row.condition, row.task, row.accuracy)
            }
        }
    }
    println!("wrote {}", summary_path.display());
    println!("wrote {}", records_path.display());
    Ok(())
}

/// Recompute robustness scores from an accuracy-group fixture (bundled
/// detail-table numbers by default).
pub fn cmd_robustness(fixture: Option<&Path>) -> CliResult<()> {
    let text = match fixture {
        Some(path) => fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?,
        None => fixtures::ROBUSTNESS_GROUPS_JSON.to_string(),
    };
    let groups = load_accuracy_groups(&text)?;
    let mut agreements = 0usize;
    let mut disagreements = 0usize;
    for group in &groups {
        let computed = robustness_score(&group.accuracies)?;
        match group.published_score {
            Some(published) => {
                let ok = (computed - published).abs() <= 0.005;
                if ok {
                    agreements += 1;
                } else {
                    disagreements += 1;
                }
                println!(
                    "{:22} {:14} {:6} computed {:6.2}  published {:6.2}{}",
                    group.model,
                    group.task,
                    group.method,
                    computed,
                    published,
                    if ok { "" } else { "  <- disagrees with source accuracies" }
                );
            }
            None => println!(
                "{:22} {:14} {:6} computed {:6.2}",
                group.model, group.task, group.method, computed
            ),
        }
    }
    println!("{agreements} published scores reproduced, {disagreements} disagree");
    Ok(())
}

/// Materialize the bundled fixtures.
pub fn cmd_fixtures(out: &Path) -> CliResult<()> {
    fixtures::write_all(out).map_err(|e| CliError::from_io(out, e))?;
    println!("fixtures written to {}", out.display());
    Ok(())
}

/// Build a model checkpoint, optionally with a planted steering direction.
pub fn cmd_build_model(
    cfg: &RunConfig,
    layers: usize,
    hidden_dim: usize,
    heads: usize,
    final_norm: &str,
    planted_token: Option<&str>,
) -> CliResult<()> {
    let tokenizer = match &cfg.lexicon_path {
        Some(path) => rot_core::model::Tokenizer::load(path)?,
        None => fixtures::tokenizer(),
    };
    let final_norm = match final_norm {
        "standard" => FinalNorm::Standard,
        "identity" => FinalNorm::Identity,
        other => return Err(CliError::config(format!("unknown final norm {other:?}"))),
    };
    let config = ModelConfig {
        layers,
        hidden_dim,
        heads,
        vocab_size: tokenizer.vocab_size(),
        final_norm,
    };
    let model = match planted_token {
        None => ToyTransformer::build(cfg.model_seed(), config)?,
        Some(token) => {
            let target = tokenizer
                .id_of(token)
                .ok_or_else(|| CliError::config(format!("token {token:?} not in lexicon")))?;
            let mut rng = SplitMix64::new(subseed(cfg.seed, "planted-direction"));
            let raw: Vec<f64> = (0..hidden_dim).map(|_| rng.next_gaussian()).collect();
            let direction = Vector::new(raw).expect("gaussian draws are finite");
            let direction = direction.scaled(1.0 / direction.norm());
            ToyTransformer::build_planted(
                cfg.model_seed(),
                config,
                config.layers,
                &direction,
                target,
            )?
        }
    };
    ensure_out_dir(cfg)?;
    let path = cfg.out.join("model.rotm");
    model.save(&path)?;
    println!("model id {}", model.model_id());
    if let Some(planted) = model.planted() {
        println!(
            "planted: layer {} target {} slope {:.6}",
            planted.layer, planted.target_token, planted.slope
        );
    }
    println!("wrote {}", path.display());
    Ok(())
}
