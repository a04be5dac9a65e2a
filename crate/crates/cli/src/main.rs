//! `reverbmix`: corpus generation, room inspection, evaluation and cascades.
//!
//! Exit status: 0 success, 1 runtime error, 2 configuration error,
//! 3 missing corpus or input folder, 4 some mixtures failed to render.

mod config;
mod evaluate;
mod generate;
mod inspect;
mod rir;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use config::{config_error, load_file, merge, section, CmdResult};

#[derive(Parser, Debug)]
#[command(
    name = "reverbmix",
    version,
    about = "Noisy reverberant two-speaker mixture corpora and their evaluation"
)]
struct Cli {
    /// TOML or JSON file with one table per subcommand; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads, 0 for one per core. Never changes any output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Progress messages on stderr
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Plan a corpus and render it
    Generate(generate::GenerateArgs),
    /// Simulate one room and report its impulse responses
    Rir(rir::RirArgs),
    /// Score separated estimates against a rendered split
    Evaluate(evaluate::EvaluateArgs),
    /// Run enhancement/separation pipelines on a rendered split
    Cascade(evaluate::CascadeArgs),
    /// Summarize a manifest or print one recipe
    Inspect(inspect::InspectArgs),
}

fn run(cli: Cli) -> CmdResult {
    let file = cli.config.as_deref().map(load_file).transpose()?;
    let threads = match (cli.threads, file.as_ref().and_then(|f| f.get("threads"))) {
        (Some(n), _) => n,
        (None, Some(Value::Number(n))) => n.as_u64().ok_or_else(|| config_error("threads must be >= 0"))? as usize,
        (None, Some(_)) => return Err(config_error("threads must be a number")),
        (None, None) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| config_error(format!("thread pool: {e}")))?;
    let file = file.as_ref();
    match &cli.command {
        Command::Generate(a) => generate::run(&merge(a, section(file, "generate")?)?, cli.verbose),
        Command::Rir(a) => rir::run(&merge(a, section(file, "rir")?)?),
        Command::Evaluate(a) => evaluate::run_evaluate(&merge(a, section(file, "evaluate")?)?),
        Command::Cascade(a) => evaluate::run_cascade(&merge(a, section(file, "cascade")?)?),
        Command::Inspect(a) => inspect::run(&merge(a, section(file, "inspect")?)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
