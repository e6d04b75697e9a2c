use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use decolab::cli::{self, CliError, EXIT_OK, EXIT_VERIFICATION};

/// Runs one decoherence scenario described by a TOML file and writes
/// `series.csv` and `summary.json` (plus `verify.csv` for `verify`).
#[derive(Debug, Parser)]
#[command(name = "decolab", version)]
struct Args {
    /// Scenario configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: `[output] dir` from the config, else ./out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress the summary on stdout.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("decolab: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(args: &Args) -> Result<u8, CliError> {
    let mut config = cli::load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args.out.clone().or_else(|| config.output_dir.clone()).unwrap_or_else(|| PathBuf::from("./out"));
    let artifacts = cli::run(&config, &out)?;
    if !args.quiet {
        print!("{}", artifacts.summary_json());
    }
    if artifacts.verification_failed() {
        eprintln!("decolab: verification failed, see {}", out.join("verify.csv").display());
        return Ok(EXIT_VERIFICATION);
    }
    Ok(EXIT_OK)
}
