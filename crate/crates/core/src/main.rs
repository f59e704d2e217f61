use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regime_bsde::experiment::{self, ExperimentConfig};

/// Run Markov-modulated BSDE experiments from JSON configs.
#[derive(Parser)]
#[command(name = "regime-bsde", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the parameter schema of an experiment kind.
    Describe { kind: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Describe { kind } => experiment::describe(&kind).map(|text| {
            print!("{text}");
            0
        }),
        Command::Run { config, seed, out } => ExperimentConfig::from_file(&config)
            .and_then(|cfg| experiment::run(&cfg, seed, out.as_deref()))
            .map(|report| {
                for (name, ok) in &report.outcome.verdicts {
                    println!("{:<28} {}", name, if *ok { "pass" } else { "FAIL" });
                }
                println!("results in {}", report.out_dir.display());
                report.exit_code()
            }),
    };
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
