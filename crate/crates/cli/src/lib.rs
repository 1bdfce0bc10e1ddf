//! Command-line front end: configuration, orchestration and file output.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 numeric
//! failure (non-convergence, boundary reached, failed verification).

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{parse_config, RunConfig};
use output::RunDir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numeric(String),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        CliError::Numeric(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fibxy::Error> for CliError {
    fn from(e: fibxy::Error) -> Self {
        if e.is_numeric() {
            CliError::Numeric(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fibxy", version, about = "Light cones and transport exponents for the Fibonacci XY chain")]
pub struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(short, long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set potential.lambda=12`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Write the field sequence.
    Potential,
    /// Propagator rows from site 1 over the time grid.
    Evolve,
    /// Outside probabilities, moments and transport exponents.
    Transport,
    /// Trace-map orbit, growth check and phase independence.
    Tracemap,
    /// Band roots and the alpha' estimate.
    Alphaprime,
    /// Commutator fronts and light-cone fits.
    Cone,
    /// Dense many-body verification grid.
    OracleCheck,
    /// Random-dimer formulas and ensemble transport.
    Dimer,
    /// Consistency of prior cone, transport and alphaprime outputs.
    Report,
    /// Print the resolved configuration and its hash.
    ShowConfig,
}

impl Command {
    pub fn dir_name(self) -> &'static str {
        match self {
            Command::Potential => "potential",
            Command::Evolve => "evolve",
            Command::Transport => "transport",
            Command::Tracemap => "tracemap",
            Command::Alphaprime => "alphaprime",
            Command::Cone => "cone",
            Command::OracleCheck => "oracle-check",
            Command::Dimer => "dimer",
            Command::Report => "report",
            Command::ShowConfig => "show-config",
        }
    }
}

/// Runs one command; returns the run directory on success.
pub fn execute(command: Command, cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    if command == Command::ShowConfig {
        let text = serde_json::to_string_pretty(cfg).expect("config serializes");
        println!("{text}\nconfig_hash: {}", cfg.config_hash());
        return Ok(None);
    }
    let root = cfg.output_root();
    let mut out = RunDir::create(&root, command.dir_name())?;
    out.json("config.json", "RunConfig", &cfg.hashed_view())?;
    let verified = match command {
        Command::Potential => commands::potential(cfg, &mut out).map(|_| true),
        Command::Evolve => commands::evolve(cfg, &mut out).map(|_| true),
        Command::Transport => commands::transport(cfg, &mut out).map(|_| true),
        Command::Tracemap => commands::tracemap(cfg, &mut out).map(|_| true),
        Command::Alphaprime => commands::alphaprime(cfg, &mut out).map(|_| true),
        Command::Cone => commands::cone(cfg, &mut out).map(|_| true),
        Command::OracleCheck => commands::oracle(cfg, &mut out),
        Command::Dimer => commands::dimer(cfg, &mut out).map(|_| true),
        Command::Report => commands::report(cfg, &root, &mut out),
        Command::ShowConfig => unreachable!(),
    };
    let verified = match verified {
        Ok(v) => v,
        Err(e) => {
            // keep the manifest consistent with whatever was written
            let _ = out.finish(&cfg.config_hash());
            return Err(e);
        }
    };
    let dir = out.path().to_path_buf();
    out.finish(&cfg.config_hash())?;
    if !verified {
        return Err(CliError::numeric(format!("verification failed, see {}", dir.display())));
    }
    Ok(Some(dir))
}

fn run_with_pool(command: Command, cfg: &RunConfig) -> Result<Option<PathBuf>, CliError> {
    match cfg.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| CliError::config(format!("cannot start {jobs} worker threads: {e}")))?
            .install(|| execute(command, cfg)),
        None => execute(command, cfg),
    }
}

/// Parses arguments, runs, reports, and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = parse_config(cli.config.as_deref(), &cli.overrides).and_then(|cfg| run_with_pool(cli.command, &cfg));
    match result {
        Ok(Some(dir)) => {
            eprintln!("wrote {}", dir.display());
            EXIT_OK
        }
        Ok(None) => EXIT_OK,
        Err(e) => {
            eprintln!("fibxy: {e}");
            e.exit_code()
        }
    }
}
