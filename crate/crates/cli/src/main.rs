use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lensless_core::harness::{cmd_design, cmd_image, cmd_min_patterns, cmd_transport, ExperimentConfig};
use lensless_core::Error;

#[derive(Parser)]
#[command(name = "lensless", version, about = "Lensless time-resolved imaging experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Transport matrices, ring maps and resolution-limit table
    Transport(RunArgs),
    /// Placement coherence sweep and pattern comparison
    Design(RunArgs),
    /// Simulate, reconstruct and score input images
    Image(RunArgs),
    /// Minimal pattern count reaching the quality thresholds
    MinPatterns(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the config
    #[arg(long)]
    seed: Option<u64>,
}

fn run(cli: Cli) -> Result<usize, Error> {
    let (command, args) = match &cli.command {
        Command::Transport(a) => ("transport", a),
        Command::Design(a) => ("design", a),
        Command::Image(a) => ("image", a),
        Command::MinPatterns(a) => ("min-patterns", a),
    };
    let (mut cfg, text) = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let out = match command {
        "transport" => cmd_transport(&cfg, &text, &args.out)?,
        "design" => cmd_design(&cfg, &text, &args.out)?,
        "image" => cmd_image(&cfg, &text, &args.out)?,
        _ => cmd_min_patterns(&cfg, &text, &args.out)?,
    };
    Ok(out.files.len())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(n) => {
            println!("wrote {n} files");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: kind={} msg={msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}
