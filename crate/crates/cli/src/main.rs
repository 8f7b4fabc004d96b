//! `skz` — experiment runner for the sketched-preconditioner Kaczmarz
//! solver. See `config.rs` for the config schema.

mod compare;
mod config;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use skaczmarz::Error;

#[derive(Parser)]
#[command(name = "skz", version, about = "Randomized Kaczmarz experiment runner")]
struct Cli {
    #[command(subcommand)]
    verb: Verb,
}

#[derive(Subcommand)]
enum Verb {
    /// Run an experiment config; writes traces, summary.csv and manifest.txt
    Run {
        /// Path to a sectioned key = value config file
        config: PathBuf,
    },
    /// Tabulate traces from a run directory and report plain-crossings
    Compare {
        /// Directory containing trace CSVs from `run`
        dir: PathBuf,
    },
    /// Export the configured problem (first seed) as Matrix Market files
    Gen {
        /// Config file whose [problem] section describes the system
        config: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the ground-truth phantom image
    Phantom {
        /// Grid side length (>= 8)
        #[arg(long)]
        q: usize,
        /// Output file; .pgm or .csv decides the format
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit codes: 0 success, 1 config error, 2 runtime failure.
enum CliError {
    Config(String),
    Runtime(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.verb {
        Verb::Run { config } => {
            let cfg = config::parse_config(&config)?;
            let dir = runner::execute(&cfg)?;
            println!(
                "wrote {} trace file(s), summary.csv and manifest.txt under {}",
                cfg.run.seeds.len()
                    * (cfg.methods.plain as usize
                        + cfg.methods.preconditioned.len()
                        + cfg.methods.fine_tuned.len()),
                dir.display()
            );
            Ok(())
        }
        Verb::Compare { dir } => {
            print!("{}", compare::render_comparison(&dir)?);
            Ok(())
        }
        Verb::Gen { config, out } => {
            let cfg = config::parse_config(&config)?;
            let stem = runner::export_problem(&cfg, &out)?;
            println!("wrote {}.{{A.mtx,b.txt,x.txt,meta}}", stem.display());
            Ok(())
        }
        Verb::Phantom { q, out } => {
            let image = skaczmarz::problems::shepp_logan_phantom(q)?;
            match out.extension().and_then(|e| e.to_str()) {
                Some("pgm") => image.write_pgm(&out)?,
                Some("csv") => image.write_csv(&out)?,
                _ => {
                    return Err(CliError::Config(format!(
                        "{}: output must end in .pgm or .csv",
                        out.display()
                    )))
                }
            }
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
