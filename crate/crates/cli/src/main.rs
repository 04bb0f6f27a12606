use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use oamlink_cli::config::ExperimentConfig;
use oamlink_cli::{resolve_seed, run, CliError, Command, ENV_SEED};

/// Simulated classical-to-quantum OAM link and its verification chain.
#[derive(Parser)]
#[command(name = "oamlink", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides both OAMLINK_SEED and the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execute(args: &Args) -> Result<Vec<PathBuf>, CliError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let env = std::env::var(ENV_SEED).ok();
    let seed = resolve_seed(args.seed, env.as_deref(), cfg.seed)?;
    let out = args.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    run(args.command, &cfg, seed, &out)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("oamlink: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
