//! `burgers`: batch runner for the successive-approximation experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod config;
mod output;
mod registry;
mod run;

use config::RunConfig;
use run::RunError;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;

#[derive(Parser)]
#[command(name = "burgers", about = "Run and verify viscous Burgers successive-approximation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML configuration.
    Run {
        config: PathBuf,
        /// Run the requested checks on separate threads.
        #[arg(long)]
        concurrent: bool,
    },
    /// Print the experiment catalog.
    List,
    /// Print the version.
    Version,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::List => {
            print!("{}", registry::listing());
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("burgers {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
        Command::Run { config, concurrent } => {
            let cfg = match RunConfig::load(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let dir = run::output_dir(&cfg);
            match run::run(&cfg, &dir, concurrent) {
                Ok(summary) => {
                    for (name, ok) in &summary.verdicts {
                        println!("{name}: {}", if *ok { "PASS" } else { "FAIL" });
                    }
                    println!("artifacts in {}", summary.out_dir.display());
                    if summary.passed() {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(EXIT_CHECK_FAILED)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(match e {
                        RunError::Config(_) => EXIT_CONFIG,
                        RunError::Divergence(_) => EXIT_DIVERGENCE,
                        RunError::Io(_) | RunError::Numerical(_) => EXIT_CHECK_FAILED,
                    })
                }
            }
        }
    }
}
