use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cityscale_cli::commands::{run, Command, Globals};
use cityscale_cli::{ErrorKind, StageError};

#[derive(Parser, Debug)]
#[command(name = "cityscale", version, about = "Scaling of city attractiveness for foreign visitors")]
struct Cli {
    /// JSON config: the pipeline config, or a synthetic spec for `synth`
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Abort on the first malformed input row
    #[arg(long, global = true)]
    strict: bool,
    /// Seed for `synth`
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let globals = Globals { config: cli.config.as_deref(), strict: cli.strict, seed: cli.seed };
    let result = match cli.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| StageError::new(ErrorKind::Input, "threads", e))
            .and_then(|pool| pool.install(|| run(cli.command, globals))),
        None => run(cli.command, globals),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cityscale: {e}");
            ExitCode::from(e.kind.exit_code() as u8)
        }
    }
}
