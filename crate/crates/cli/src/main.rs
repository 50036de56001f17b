use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skytraffic_cli::{evaluate, run, synth, CliError, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "skytraffic",
    version,
    about = "Aerial traffic detection, tracking and analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the pipeline described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Score the tracks of a previous run against ground truth.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        gt: PathBuf,
    },
    /// Render a synthetic scenario to a frame directory.
    Synth {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let cfg = PipelineConfig::load(&config)?;
            let text = std::fs::read_to_string(&config)
                .map_err(|_| CliError::MissingFile(config.clone()))?;
            let summary = run(&cfg, &text)?;
            println!("{}", summary.output_dir.join("manifest.json").display());
        }
        Command::Evaluate { config, gt } => {
            let cfg = PipelineConfig::load(&config)?;
            println!("{}", evaluate(&cfg, &gt)?.display());
        }
        Command::Synth { scenario, out } => synth(&scenario, &out)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::FAILURE
        }
    }
}
