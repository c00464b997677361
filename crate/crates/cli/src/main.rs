//! `autog`: tables in, graph out.
//!
//! Exit codes: 0 on success, 1 when the pipeline fails, 2 on bad usage.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use autog_core::join::{Method, DEFAULT_TOP_N};
use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::{Ctx, Variant};
use crate::config::{CommonArgs, RunConfig};

/// Bad flags, config or positional arguments.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "autog", version, about = "Turn relational tables into graph datasets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SimilarityMethod {
    Embedding,
    Overlap,
}

#[derive(Subcommand)]
enum Command {
    /// Column statistics.
    Profile {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Semantic column types, by rules or by the model.
    InferTypes {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Ranked join candidates between columns of different tables.
    Similarity {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum, default_value = "embedding")]
        method: SimilarityMethod,
        #[arg(long, default_value_t = DEFAULT_TOP_N)]
        top: usize,
    },
    /// Apply an action list (or an answer key) to a schema.
    Apply {
        #[command(flatten)]
        common: CommonArgs,
        /// [SCHEMA] ACTIONS
        #[arg(num_args = 1..=2, required = true)]
        files: Vec<PathBuf>,
    },
    /// Let the model augment the schema.
    Plan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Build and export the graph of a schema.
    BuildGraph {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Score one or more schemas with the oracle basket and rank them.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Kendall tau distance between two rankings.
    Compare {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(num_args = 2, required = true)]
        files: Vec<PathBuf>,
    },
    /// Generate a synthetic benchmark with its answer key.
    Synth {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Everything from profiling to the winning graph.
    Run {
        #[command(flatten)]
        common: CommonArgs,
    },
}

impl Command {
    fn parts(&self) -> (&'static str, &CommonArgs) {
        match self {
            Command::Profile { common } => ("profile", common),
            Command::InferTypes { common } => ("infer-types", common),
            Command::Similarity { common, .. } => ("similarity", common),
            Command::Apply { common, .. } => ("apply", common),
            Command::Plan { common, .. } => ("plan", common),
            Command::BuildGraph { common } => ("build-graph", common),
            Command::Evaluate { common } => ("evaluate", common),
            Command::Compare { common, .. } => ("compare", common),
            Command::Synth { common } => ("synth", common),
            Command::Run { common } => ("run", common),
        }
    }
}

fn execute(command: Command, argv: Vec<String>) -> anyhow::Result<bool> {
    let (name, common) = command.parts();
    let cfg = RunConfig::resolve(common)?;
    let mut ctx = Ctx::new(name, argv, cfg)?;
    let ok = match &command {
        Command::Profile { .. } => commands::profile(&mut ctx).map(|_| true),
        Command::InferTypes { .. } => commands::infer(&mut ctx).map(|_| true),
        Command::Similarity { method, top, .. } => {
            let method = match method {
                SimilarityMethod::Embedding => Method::Embedding,
                SimilarityMethod::Overlap => Method::Overlap,
            };
            commands::similarity(&mut ctx, method, *top).map(|_| true)
        }
        Command::Apply { files, .. } => commands::apply(&mut ctx, files).map(|_| true),
        Command::Plan { variant, .. } => commands::plan(&mut ctx, *variant).map(|_| true),
        Command::BuildGraph { .. } => commands::build(&mut ctx).map(|_| true),
        Command::Evaluate { .. } => commands::evaluate(&mut ctx).map(|_| true),
        Command::Compare { files, .. } => commands::compare(&mut ctx, files).map(|_| true),
        Command::Synth { .. } => commands::synth(&mut ctx).map(|_| true),
        Command::Run { .. } => commands::run(&mut ctx),
    }?;
    ctx.finish()?;
    Ok(ok)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_env("AUTOG_LOG").unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command, argv[1..].to_vec()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: pipeline failed; see summary.json");
            ExitCode::from(1)
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
