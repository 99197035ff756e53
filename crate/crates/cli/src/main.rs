#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hodge_proj::ErrorCategory;

mod checks;
mod commands;
mod config;
mod output;

use config::{ConfigError, RunConfig};

/// Hodge-theoretic bidifferentials and projective structures on curves.
#[derive(Debug, Parser)]
#[command(name = "hodge-proj", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Replace a tolerance, e.g. `--tol-override quadrature=1e-13`. Repeatable.
    #[arg(long = "tol-override", global = true, value_name = "KEY=VALUE")]
    tol_override: Vec<String>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Build the intrinsic kernel of each curve and dump it with diagnostics.
    ComputeEta,
    /// Run the invariant suite and write a pass/fail report.
    Verify,
    /// Finite-difference dbar of the genus-1 connection coefficient over a grid of moduli.
    ModuliScan,
    /// Follow the genus-2 connection along a branch-point deformation.
    Genus2Trace,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::ComputeEta => "compute-eta",
            Command::Verify => "verify",
            Command::ModuliScan => "moduli-scan",
            Command::Genus2Trace => "genus2-trace",
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if let Some(err) = e.downcast_ref::<hodge_proj::Error>() {
        return match err.category() {
            ErrorCategory::Input => 1,
            ErrorCategory::Invariant => 2,
            ErrorCategory::Numeric => 3,
        };
    }
    if e.downcast_ref::<ConfigError>().is_some() {
        return 1;
    }
    1
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    let name = cli.command.name();
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::empty(),
    };
    for item in &cli.tol_override {
        cfg.tolerances.apply(item)?;
    }
    cfg.validate(name)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError::Invalid("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    std::fs::create_dir_all(&cli.out)?;
    let stem = cfg.stem(name);
    match cli.command {
        Command::ComputeEta => commands::compute_eta(&cfg, &cli.out, &stem),
        Command::Verify => commands::verify(&cfg, &cli.out, &stem),
        Command::ModuliScan => commands::moduli_scan(&cfg, &cli.out, &stem),
        Command::Genus2Trace => commands::genus2_trace(&cfg, &cli.out, &stem),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
