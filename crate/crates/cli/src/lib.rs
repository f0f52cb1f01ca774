//! Command-line orchestration for the kicked-oscillator simulator.
//!
//! `kfx classical|quantum|spectrum|negativity|crosscheck --config <file>
//! [--out <dir>] [--seed <u64>] [--force]`
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical abort,
//! 4 oracle failure, 1 anything else (I/O).

pub mod commands;
pub mod manifest;

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use kfx_core::params::parse_run_config;
use kfx_core::RunConfig;

pub use commands::RunOptions;
pub use manifest::{verify_manifest, Manifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_ORACLE: i32 = 4;

/// A precondition on the configuration that is not a parse error.
#[derive(Debug)]
pub struct ConfigProblem(pub String);

impl fmt::Display for ConfigProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigProblem {}

/// One or more oracle comparisons exceeded tolerance.
#[derive(Debug)]
pub struct OracleFailure(pub String);

impl fmt::Display for OracleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for OracleFailure {}

#[derive(Debug, Parser)]
#[command(name = "kfx", version, about = "Dissipatively kicked quantum oscillator simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classical ensemble: attractor histogram, energy series, Lyapunov exponents.
    Classical(RunArgs),
    /// Lindblad evolution with Husimi grids and density-matrix snapshots.
    Quantum(RunArgs),
    /// Density-matrix spectra, pair splittings and entropy.
    Spectrum(RunArgs),
    /// Negativity of a virtual qubit entangled with two coherent states.
    Negativity(RunArgs),
    /// Oracle comparisons at reduced size.
    Crosscheck(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// RNG seed; overrides `seed` from the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Proceed past basis-sufficiency and truncation limits, recording warnings.
    #[arg(long)]
    pub force: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Classical(_) => "classical",
            Command::Quantum(_) => "quantum",
            Command::Spectrum(_) => "spectrum",
            Command::Negativity(_) => "negativity",
            Command::Crosscheck(_) => "crosscheck",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Classical(a)
            | Command::Quantum(a)
            | Command::Spectrum(a)
            | Command::Negativity(a)
            | Command::Crosscheck(a) => a,
        }
    }
}

/// Reads the configuration file and applies command-line overrides.
pub fn load_config(args: &RunArgs) -> Result<RunConfig> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| ConfigProblem(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut cfg = parse_run_config(&text).with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Runs one subcommand to completion and writes its manifest.
pub fn execute(command: &Command) -> Result<PathBuf> {
    let args = command.args();
    let cfg = load_config(args)?;
    let opts = RunOptions { force: args.force };
    let mut m = Manifest::new(&cfg.out_dir, command.name(), &cfg, opts.force)?;
    match command {
        Command::Classical(_) => commands::classical(&cfg, &opts, &mut m)?,
        Command::Quantum(_) => commands::quantum(&cfg, &opts, &mut m)?,
        Command::Spectrum(_) => commands::spectrum(&cfg, &opts, &mut m)?,
        Command::Negativity(_) => commands::negativity(&cfg, &opts, &mut m)?,
        Command::Crosscheck(_) => {
            // the oracle table is written even when a check fails
            let result = commands::crosscheck(&cfg, &opts, &mut m);
            m.finish()?;
            result?;
            return Ok(cfg.out_dir.join(manifest::MANIFEST_NAME));
        }
    }
    m.finish()
}

/// Maps an error chain to the documented exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    use kfx_core::Error as E;
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigProblem>().is_some() {
            return EXIT_CONFIG;
        }
        if cause.downcast_ref::<OracleFailure>().is_some() {
            return EXIT_ORACLE;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::InvalidParams(_) | E::Config { .. } | E::ConfigMissing(_) | E::Grid(_) => EXIT_CONFIG,
                E::Overflow { .. }
                | E::Truncation { .. }
                | E::Eigen { .. }
                | E::QuadratureOrder { .. }
                | E::StepTooLarge { .. }
                | E::SizeMismatch { .. }
                | E::AssemblyNotHermitian(_) => EXIT_NUMERICAL,
                E::Snapshot(_) | E::Io(_) => EXIT_OTHER,
            };
        }
    }
    EXIT_OTHER
}

/// Parses `argv`, runs, reports to stderr and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(path) => {
            eprintln!("kfx {}: wrote {}", cli.command.name(), path.display());
            EXIT_OK
        }
        Err(err) => {
            eprintln!("kfx {}: error: {err:#}", cli.command.name());
            exit_code(&err)
        }
    }
}
