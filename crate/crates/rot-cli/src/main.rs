//! `rot` — reading vectors, reasoning-error localization, and activation
//! steering on a deterministic toy transformer.
//!
//! Pipeline: `read` (extract reading vectors) -> `localize` (mark reasoning
//! errors) -> `steer` (inject vectors during generation) -> `eval`
//! (accuracy + robustness), plus `dump` / `build-model` / `fixtures` /
//! `robustness` tooling.

mod commands;
mod config;
mod errors;
mod runtime;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::CommonArgs;
use errors::CliResult;

#[derive(Parser)]
#[command(name = "rot", version, about = "reading-vector toolkit for CoT reasoning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ReadArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Capture activations from a ROTD dump instead of the live model.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Also write a plain-text vector export for diffing.
    #[arg(long)]
    export_text: bool,
}

#[derive(clap::Args)]
struct DumpArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// JSON-lines prompts file ({"id", "polarity", "text"}); defaults to
    /// the stimulus corpus of --task.
    #[arg(long)]
    prompts: Option<PathBuf>,
    /// Payload precision: f64 | f32.
    #[arg(long, default_value = "f64")]
    dtype: String,
}

#[derive(clap::Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    prompt: String,
}

#[derive(clap::Args)]
struct LocalizeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reading-vector file (.rotv).
    #[arg(long)]
    readers: PathBuf,
    #[arg(long)]
    prompt: String,
    /// Response to score; omitted, the model generates one unsteered.
    #[arg(long)]
    response: Option<String>,
}

#[derive(clap::Args)]
struct SteerArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Reading-vector file (.rotv).
    #[arg(long)]
    readers: PathBuf,
    #[arg(long)]
    prompt: String,
    /// Also export the policy as a ROTS file.
    #[arg(long)]
    export_policy: Option<PathBuf>,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma list: base, cot_z, rot_z, cot_f, rot_f, or specific variants
    /// like cot_z2.
    #[arg(long, default_value = "base,cot_z")]
    conditions: String,
    /// Reading vectors for rot_z conditions (and rot_f unless
    /// --readers-few is given).
    #[arg(long)]
    readers: Option<PathBuf>,
    /// Reading vectors for rot_f conditions.
    #[arg(long)]
    readers_few: Option<PathBuf>,
    /// Answer kind for custom task files:
    /// yes_no | multiple_choice | number | letters.
    #[arg(long)]
    task_kind: Option<String>,
    /// Evaluate only the first N queries (by id).
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(clap::Args)]
struct RobustnessArgs {
    /// Accuracy-group fixture (JSON); defaults to the bundled numbers.
    #[arg(long)]
    fixture: Option<PathBuf>,
}

#[derive(clap::Args)]
struct FixturesArgs {
    /// Directory to materialize the bundled fixtures into.
    #[arg(long, default_value = "fixtures")]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BuildModelArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 6)]
    model_layers: usize,
    #[arg(long, default_value_t = 64)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    /// standard | identity (planted models require identity).
    #[arg(long, default_value = "standard")]
    final_norm: String,
    /// Plant an analytically known steering direction toward this token at
    /// the last layer.
    #[arg(long)]
    planted_token: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract per-layer reading vectors from contrastive stimuli.
    Read(ReadArgs),
    /// Write an activation dump (ROTD) for external-model interop.
    Dump(DumpArgs),
    /// Unsteered greedy generation.
    Generate(GenerateArgs),
    /// Score a response token-by-token and mark reasoning errors.
    Localize(LocalizeArgs),
    /// Steered generation with reading-vector injection.
    Steer(SteerArgs),
    /// Benchmark base/CoT/steered conditions: accuracy and robustness.
    Eval(EvalArgs),
    /// Recompute robustness scores from accuracy fixtures.
    Robustness(RobustnessArgs),
    /// Materialize bundled fixtures (tasks, demos, lexicon, templates).
    Fixtures(FixturesArgs),
    /// Build and save a toy model checkpoint (ROTM).
    BuildModel(BuildModelArgs),
}

fn init_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        // The global pool can only be set once; later calls are no-ops.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Read(args) => {
            let cfg = config::resolve(&args.common)?;
            init_workers(cfg.workers);
            commands::cmd_read(&cfg, args.dump.as_deref(), args.export_text)
        }
        Command::Dump(args) => {
            let cfg = config::resolve(&args.common)?;
            init_workers(cfg.workers);
            commands::cmd_dump(&cfg, args.prompts.as_deref(), &args.dtype)
        }
        Command::Generate(args) => {
            let cfg = config::resolve(&args.common)?;
            init_workers(cfg.workers);
            commands::cmd_generate(&cfg, &args.prompt)
        }
        Command::Localize(args) => {
            let cfg = config::resolve(&args.common)?;
            init_workers(cfg.workers);
            commands::cmd_localize(&cfg, &args.readers, &args.prompt, args.response.as_deref())
        }
        Command::Steer(args) => {
            let cfg = config::resolve(&args.common)?;
            init_workers(cfg.workers);
            commands::cmd_steer(&cfg, &args.readers, &args.prompt, args.export_policy.as_deref())
        }
        Command::Eval(args) => {
            let cfg = config::resolve(&args.common)?;
            init_workers(cfg.workers);
            commands::cmd_eval(
                &cfg,
                &args.conditions,
                args.readers.as_deref(),
                args.readers_few.as_deref(),
                args.task_kind.as_deref(),
                args.limit,
            )
        }
        Command::Robustness(args) => commands::cmd_robustness(args.fixture.as_deref()),
        Command::Fixtures(args) => commands::cmd_fixtures(&args.out),
        Command::BuildModel(args) => {
            let cfg = config::resolve(&args.common)?;
            commands::cmd_build_model(
                &cfg,
                args.model_layers,
                args.hidden_dim,
                args.heads,
                &args.final_norm,
                args.planted_token.as_deref(),
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}
