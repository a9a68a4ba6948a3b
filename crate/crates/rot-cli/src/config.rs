//! Run configuration with layered precedence: command-line flags beat
//! ROT_-prefixed environment variables (clap handles those two), which beat
//! the TOML config file, which beats the per-task calibrated defaults,
//! which beat the built-in defaults (N = 128, last-5 layers, M = 1,
//! delta = 10, greedy decoding with 512 new tokens).

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use rot_core::model::SignMode;
use rot_core::populations::LayerSpec;
use rot_core::rng::subseed;
use rot_core::stimuli::{SelectionStrategy, StimulusKind};
use serde::Deserialize;

use crate::errors::{CliError, CliResult};

#[derive(Args, Debug, Clone, Default)]
pub struct CommonArgs {
    /// TOML config file; flags and ROT_* env vars override it.
    #[arg(long, env = "ROT_CONFIG", global = true)]
    pub config: Option<PathBuf>,

    /// Model checkpoint (.rotm); omit to build a toy model from the seed.
    #[arg(long, env = "ROT_MODEL")]
    pub model: Option<PathBuf>,

    /// Tokenizer lexicon file; omit for the bundled lexicon.
    #[arg(long, env = "ROT_LEXICON")]
    pub lexicon: Option<PathBuf>,

    /// Root seed; every random component derives a sub-seed from it.
    #[arg(long, env = "ROT_SEED")]
    pub seed: Option<u64>,

    /// Layer subset: `last:5` or explicit `4,5,6`.
    #[arg(long, env = "ROT_LAYERS")]
    pub layers: Option<String>,

    /// Number of queries in the stimulus set (N).
    #[arg(long = "n-samples", env = "ROT_N_SAMPLES")]
    pub n_samples: Option<usize>,

    /// Query selection strategy: random | low-ppl | high-ppl.
    #[arg(long, env = "ROT_SELECT")]
    pub select: Option<String>,

    /// Stimulus kind: zero | few.
    #[arg(long, env = "ROT_STIMULI")]
    pub stimuli: Option<String>,

    /// Stimuli per query (M).
    #[arg(long, env = "ROT_M")]
    pub m: Option<usize>,

    /// Localization threshold.
    #[arg(long, env = "ROT_DELTA")]
    pub delta: Option<f64>,

    /// Steering strength magnitude.
    #[arg(long, env = "ROT_ALPHA")]
    pub alpha: Option<f64>,

    /// Steering sign rule: proj | pos | neg.
    #[arg(long, env = "ROT_SIGN")]
    pub sign: Option<String>,

    #[arg(long = "max-new-tokens", env = "ROT_MAX_NEW_TOKENS")]
    pub max_new_tokens: Option<usize>,

    /// Template id in the registry.
    #[arg(long, env = "ROT_TEMPLATE")]
    pub template: Option<String>,

    /// Template registry file (JSON id -> layout); omit for the bundled
    /// registry.
    #[arg(long, env = "ROT_TEMPLATES")]
    pub templates: Option<PathBuf>,

    /// Task file (JSON lines) or a bundled task name
    /// (coin-parity | letter-pick | add-small).
    #[arg(long, env = "ROT_TASK")]
    pub task: Option<String>,

    /// Demonstrations file for few-shot stimuli; bundled tasks default to
    /// their own demo sets.
    #[arg(long, env = "ROT_DEMOS")]
    pub demos: Option<PathBuf>,

    /// Output directory.
    #[arg(long, env = "ROT_OUT")]
    pub out: Option<PathBuf>,

    /// Report format: tsv | ansi | html | all.
    #[arg(long, env = "ROT_FORMAT")]
    pub format: Option<String>,

    /// Worker threads (default: available cores). Outputs are identical
    /// for any worker count.
    #[arg(long, env = "ROT_WORKERS")]
    pub workers: Option<usize>,

    /// Mean-center the population before PCA.
    #[arg(long, env = "ROT_CENTER")]
    pub center: Option<bool>,
}

/// The config-file mirror of the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    model: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    seed: Option<u64>,
    layers: Option<String>,
    n_samples: Option<usize>,
    select: Option<String>,
    stimuli: Option<String>,
    m: Option<usize>,
    delta: Option<f64>,
    alpha: Option<f64>,
    sign: Option<String>,
    max_new_tokens: Option<usize>,
    template: Option<String>,
    templates: Option<PathBuf>,
    task: Option<String>,
    demos: Option<PathBuf>,
    out: Option<PathBuf>,
    format: Option<String>,
    workers: Option<usize>,
    center: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatChoice {
    Tsv,
    Ansi,
    Html,
    All,
}

/// Per-task calibrated steering defaults bundled with the toy tasks.
#[derive(Debug, Clone, Deserialize)]
struct TaskDefault {
    alpha: Option<f64>,
    delta: Option<f64>,
}

fn task_defaults() -> BTreeMap<String, TaskDefault> {
    toml::from_str(rot_core::fixtures::TASK_DEFAULTS_TOML)
        .expect("bundled task defaults are valid TOML")
}

/// Fully resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model_path: Option<PathBuf>,
    pub lexicon_path: Option<PathBuf>,
    pub seed: u64,
    pub layers: LayerSpec,
    pub n_samples: usize,
    pub selection: SelectionKind,
    pub stimuli_kind: StimulusKind,
    pub m: usize,
    pub delta: f64,
    pub alpha: f64,
    pub sign: SignMode,
    pub max_new_tokens: usize,
    pub template: String,
    pub templates_path: Option<PathBuf>,
    pub task: Option<String>,
    pub demos_path: Option<PathBuf>,
    pub out: PathBuf,
    pub format: FormatChoice,
    pub workers: Option<usize>,
    pub center: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionKind {
    Random,
    LowPerplexity,
    HighPerplexity,
}

impl RunConfig {
    /// The selection strategy with its sub-seed applied.
    pub fn selection_strategy(&self) -> SelectionStrategy {
        match self.selection {
            SelectionKind::Random => {
                SelectionStrategy::Random { seed: subseed(self.seed, "selection") }
            }
            SelectionKind::LowPerplexity => SelectionStrategy::LowPerplexity,
            SelectionKind::HighPerplexity => SelectionStrategy::HighPerplexity,
        }
    }

    pub fn model_seed(&self) -> u64 {
        subseed(self.seed, "model")
    }

    pub fn demo_shuffle_seed(&self, variant: usize) -> u64 {
        subseed(self.seed, &format!("demo-shuffle.{variant}"))
    }
}

pub fn resolve(args: &CommonArgs) -> CliResult<RunConfig> {
    let file: FileConfig = match &args.config {
        Some(path) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::from_io(path, e))?;
            toml::from_str(&text)
                .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let task = args.task.clone().or(file.task);
    let defaults = task_defaults();
    let task_default = task.as_deref().and_then(|t| defaults.get(t));

    let seed = args.seed.or(file.seed).unwrap_or(42);
    let layers_text = args.layers.clone().or(file.layers).unwrap_or_else(|| "last:5".into());
    let layers = LayerSpec::parse(&layers_text).map_err(CliError::config)?;
    let n_samples = args.n_samples.or(file.n_samples).unwrap_or(128);
    if n_samples == 0 {
        return Err(CliError::config("n-samples must be >= 1"));
    }
    let selection = match args.select.clone().or(file.select).as_deref().unwrap_or("high-ppl") {
        "random" => SelectionKind::Random,
        "low-ppl" => SelectionKind::LowPerplexity,
        "high-ppl" => SelectionKind::HighPerplexity,
        other => return Err(CliError::config(format!("unknown selection strategy {other:?}"))),
    };
    let stimuli_kind = match args.stimuli.clone().or(file.stimuli).as_deref().unwrap_or("zero") {
        "zero" => StimulusKind::ZeroShot,
        "few" => StimulusKind::FewShot,
        other => return Err(CliError::config(format!("unknown stimulus kind {other:?}"))),
    };
    let m = args.m.or(file.m).unwrap_or(1);
    if m == 0 {
        return Err(CliError::config("m must be >= 1"));
    }
    let delta = args
        .delta
        .or(file.delta)
        .or(task_default.and_then(|d| d.delta))
        .unwrap_or(10.0);
    if !delta.is_finite() {
        return Err(CliError::config("delta must be finite"));
    }
    let alpha = args
        .alpha
        .or(file.alpha)
        .or(task_default.and_then(|d| d.alpha))
        .unwrap_or(1.8);
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(CliError::config("alpha must be a finite magnitude (use --sign for direction)"));
    }
    let sign = match args.sign.clone().or(file.sign).as_deref().unwrap_or("proj") {
        "proj" => SignMode::FollowProjection,
        "pos" => SignMode::FixedPositive,
        "neg" => SignMode::FixedNegative,
        other => return Err(CliError::config(format!("unknown sign mode {other:?}"))),
    };
    let max_new_tokens = args.max_new_tokens.or(file.max_new_tokens).unwrap_or(512);
    if max_new_tokens == 0 {
        return Err(CliError::config("max-new-tokens must be >= 1"));
    }
    let format = match args.format.clone().or(file.format).as_deref().unwrap_or("all") {
        "tsv" => FormatChoice::Tsv,
        "ansi" => FormatChoice::Ansi,
        "html" => FormatChoice::Html,
        "all" => FormatChoice::All,
        other => return Err(CliError::config(format!("unknown report format {other:?}"))),
    };

    Ok(RunConfig {
        model_path: args.model.clone().or(file.model),
        lexicon_path: args.lexicon.clone().or(file.lexicon),
        seed,
        layers,
        n_samples,
        selection,
        stimuli_kind,
        m,
        delta,
        alpha,
        sign,
        max_new_tokens,
        template: args
            .template
            .clone()
            .or(file.template)
            .unwrap_or_else(|| rot_core::stimuli::DEFAULT_TEMPLATE_ID.into()),
        templates_path: args.templates.clone().or(file.templates),
        task,
        demos_path: args.demos.clone().or(file.demos),
        out: args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("out")),
        format,
        workers: args.workers.or(file.workers),
        center: args.center.or(file.center).unwrap_or(true),
    })
}
