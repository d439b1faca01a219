use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use y00_cli::{replay, run, CliError, CliResult, RunConfig};
use y00_core::keystream::{maximal_period, PolynomialTable};

#[derive(Parser)]
#[command(name = "y00lab", version, about = "Seeded Y-00 cipher experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a config, writing its CSV and manifest.
    Run {
        config: PathBuf,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `output.dir`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Re-execute a manifest and verify its CSV.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a config without running it.
    Validate { config: PathBuf },
    /// List a polynomial table; `--check` verifies maximal periods up to
    /// degree 24.
    PolyTable {
        file: PathBuf,
        #[arg(long)]
        check: bool,
    },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run { config, threads, out_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(d) = out_dir {
                cfg.output.dir = d;
            }
            let a = run(&cfg, threads)?;
            println!("wrote {} ({} rows) and {}", a.csv.display(), a.table.rows.len(), a.manifest.display());
        }
        Command::Replay { manifest, threads } => {
            let t = replay(&manifest, threads)?;
            println!("replay matches: {} rows", t.rows.len());
        }
        Command::Validate { config } => {
            let cfg = RunConfig::load(&config)?;
            println!("ok: {} experiment", cfg.experiment.kind());
        }
        Command::PolyTable { file, check } => {
            let table = PolynomialTable::load(&file)?;
            let mut bad = 0;
            for (degree, mask) in table.iter() {
                let status = if check && degree <= 24 {
                    if maximal_period(degree, mask)? {
                        "primitive"
                    } else {
                        bad += 1;
                        "NOT primitive"
                    }
                } else {
                    "unchecked"
                };
                println!("{degree} {} taps={} {status}", mask.to_hex(), mask.count_ones());
            }
            if bad > 0 {
                return Err(CliError::Validation(format!("{bad} entries are not primitive")));
            }
        }
    }
    Ok(())
}
