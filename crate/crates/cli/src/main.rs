//! `microcavity` command-line tool.
//!
//! Exit status: 0 success, 1 usage, 2 invalid input, 3 computation failure.
//! Results go to stdout (or `--out`); diagnostics go to stderr.

mod commands;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use microcavity::config::{ConfigErrors, ToolConfig};
use microcavity::report::ReportFormat;

#[derive(Parser, Debug)]
#[command(name = "microcavity", version, about = "Design and metrology toolkit for micro-fabricated optical cavities")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// Configuration file (may also be given positionally where accepted).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Write results here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Base seed for simulations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Records,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Records => ReportFormat::Records,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Stability, mode waist, finesse and coupling for each [cavity].
    Design {
        config_file: Option<PathBuf>,
    },
    /// Membrane equilibrium, optional inverse design, and the furnace program.
    Reflow {
        config_file: Option<PathBuf>,
    },
    /// Circle and polynomial fits of profilometer scans (`x_um,z_nm` CSV).
    Metrology {
        #[arg(required = true)]
        profiles: Vec<PathBuf>,
        /// Write `<name>_residuals.csv` for each profile into this directory.
        #[arg(long)]
        residuals_dir: Option<PathBuf>,
    },
    /// Linewidth and curvature measurement round trips.
    Simulate(commands::SimulateArgs),
    /// Summary table of cavities with measured linewidths.
    Report {
        config_file: Option<PathBuf>,
    },
}

/// Error carrying its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl fmt::Display) -> Self {
        Self { code: 2, message: message.to_string() }
    }

    pub fn compute(message: impl fmt::Display) -> Self {
        Self { code: 3, message: message.to_string() }
    }
}

impl From<ConfigErrors> for Failure {
    fn from(e: ConfigErrors) -> Self {
        Failure::input(e)
    }
}

fn load_config(global: &GlobalArgs, positional: Option<PathBuf>) -> Result<ToolConfig, Failure> {
    let path = match (positional, &global.config) {
        (Some(_), Some(_)) => return Err(Failure { code: 1, message: "give the configuration either positionally or with --config, not both".into() }),
        (Some(p), None) => Some(p),
        (None, p) => p.clone(),
    };
    match path {
        Some(p) => Ok(ToolConfig::from_path(&p)?),
        None => Ok(ToolConfig::default()),
    }
}

fn emit(global: &GlobalArgs, bytes: &[u8]) -> Result<(), Failure> {
    match &global.out {
        Some(path) => fs::write(path, bytes).map_err(|e| Failure::input(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(|e| Failure::input(format!("cannot write output: {e}")))
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let g = &cli.global;
    let (bytes, deferred) = match cli.command {
        Command::Design { config_file } => commands::design(&load_config(g, config_file)?, g.format),
        Command::Reflow { config_file } => commands::reflow(&load_config(g, config_file)?, g.format),
        Command::Metrology { profiles, residuals_dir } => {
            let config = load_config(g, None)?;
            commands::metrology(&config, &profiles, residuals_dir.as_deref(), g.format)
        }
        Command::Simulate(args) => commands::simulate(&load_config(g, None)?, &args, g.seed, g.format),
        Command::Report { config_file } => commands::report(&load_config(g, config_file)?, g.format),
    }?;
    emit(g, &bytes)?;
    // partial results are written before a failure elsewhere is reported
    match deferred {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
