//! `mtqed` command-line frontend.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;
mod sweep;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mtqed::par::Execution;

use commands::{Command, Outcome};
use config::Config;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Solver(#[from] mtqed::Error),
    #[error("gate failure: {0}")]
    Gate(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Solver(mtqed::Error::InvalidParameter { .. } | mtqed::Error::Unit(_)) => 2,
            CliError::Solver(_) => 3,
            CliError::Gate(_) => 4,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "mtqed",
    version,
    about = "Cavity QED, decoherence and kink-soliton scenarios"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Worker threads; 1 forces sequential execution.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Absorption spectrum scan (analytic or weak-probe numeric).
    Spectrum(Common),
    /// Master-equation time series.
    Evolve(Common),
    /// Cat-state decoherence rate against pointer distance.
    Cat(Common),
    /// Travelling kink solve and profile export.
    Soliton(Common),
    /// Microtubule cavity estimate report.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Exit with status 4 unless every window passes.
        #[arg(long)]
        check: bool,
    },
    /// Scan one key of another command.
    Sweep(Common),
    /// Merge CSV outputs and fit scaling exponents.
    Report {
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execution(jobs: Option<usize>) -> Result<Execution, CliError> {
    match jobs {
        Some(0) => Err(CliError::Config("--jobs must be >= 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(_k) => {
            #[cfg(feature = "parallel")]
            rayon::ThreadPoolBuilder::new()
                .num_threads(_k)
                .build_global()
                .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
            Ok(Execution::default())
        }
        None => Ok(Execution::default()),
    }
}

fn emit(out: Option<&Path>, body: &str, summary: &str) -> Result<(), CliError> {
    match out {
        Some(p) => {
            std::fs::write(p, body)?;
            println!("{summary}");
        }
        None => {
            print!("{body}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn run_common(
    c: &Common,
    f: impl FnOnce(&Config, Execution) -> Result<Outcome, CliError>,
) -> Result<Outcome, CliError> {
    let exec = execution(c.jobs)?;
    let cfg = Config::load(c.config.as_deref(), &c.set)?;
    let outcome = f(&cfg, exec)?;
    emit(c.out.as_deref(), &outcome.body, &outcome.summary)?;
    Ok(outcome)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Sub::Spectrum(c) => run_common(&c, |cfg, e| Command::Spectrum.run(cfg, e)).map(drop),
        Sub::Evolve(c) => run_common(&c, |cfg, e| Command::Evolve.run(cfg, e)).map(drop),
        Sub::Cat(c) => run_common(&c, |cfg, e| Command::Cat.run(cfg, e)).map(drop),
        Sub::Soliton(c) => run_common(&c, |cfg, e| Command::Soliton.run(cfg, e)).map(drop),
        Sub::Sweep(c) => run_common(&c, sweep::sweep).map(drop),
        Sub::Estimate { common, check } => {
            let o = run_common(&common, |cfg, e| Command::Estimate.run(cfg, e))?;
            if check && !o.gates_pass {
                return Err(CliError::Gate(o.summary));
            }
            Ok(())
        }
        Sub::Report { inputs, out } => {
            let (body, pass) = report::report(&inputs)?;
            let summary = format!(
                "report: {} inputs, fits {}",
                inputs.len(),
                if pass { "pass" } else { "FAIL" }
            );
            emit(out.as_deref(), &body, &summary)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
