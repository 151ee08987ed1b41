use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod input;
mod resources;

use resources::ConfigError;

/// Unsupervised labeled constituency parsing with masked-LM span divergence.
#[derive(Parser, Debug)]
#[command(name = "dpndd", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate labeled trees for POS-tagged sentences.
    Parse(commands::ParseArgs),
    /// Label the spans of existing unlabeled trees.
    Label(commands::LabelArgs),
    /// Unlabeled/labeled bracket F1 of predicted against gold trees.
    Eval(commands::EvalArgs),
    /// Average divergence caused by substituting spans across labels.
    Disturb(commands::DisturbArgs),
    /// Prefetch distributions into a cache, or list the queries a run needs.
    Cache(commands::CacheArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(resources::config_err("--workers must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Parse(a) => commands::parse(a),
        Command::Label(a) => commands::label(a),
        Command::Eval(a) => commands::eval(a),
        Command::Disturb(a) => commands::disturb(a),
        Command::Cache(a) => commands::cache(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
