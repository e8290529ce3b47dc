//! Command-line front end: basis checks, the interior-mode rank check,
//! induction experiments and mesh statistics.

pub mod commands;
pub mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Solver(#[from] hdivct::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hdivct", version, about = "Hierarchical H(div) elements and divergence-free induction runs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Shape counts, trace locality, orthonormality, independence, completeness and divergence checks.
    BasisCheck(BasisCheckArgs),
    /// Rank of the divergence of the interior modes against dim P_{p-1}.
    Lemma1(Lemma1Args),
    /// Induction experiment: one CSV row per level and correction mode.
    Run(RunArgs),
    /// Element, face and degree-of-freedom counts of the periodic meshes.
    MeshInfo(MeshInfoArgs),
}

#[derive(Debug, Args)]
pub struct BasisCheckArgs {
    /// Degrees to check, e.g. 1..4
    #[arg(long, default_value = "1..4")]
    pub p: String,
    /// Seed of the random sample points
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write the report to this file
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Lemma1Args {
    /// Degrees to check (each at least 2), e.g. 2..5
    #[arg(long, default_value = "2..5")]
    pub p: String,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// key=value file with defaults for the flags below
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Polynomial degree [default: 3]
    #[arg(long)]
    pub p: Option<usize>,
    /// Mesh levels, e.g. 2..4 [default: 2..4]
    #[arg(long)]
    pub levels: Option<String>,
    /// Time step [default: 0.005]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of steps [default: 100]
    #[arg(long)]
    pub steps: Option<usize>,
    /// Correction modes: none, local, local+global, global-full, comma lists or all [default: none]
    #[arg(long)]
    pub mode: Option<String>,
    /// Transport integration: exact or quadrature-<degree> [default: exact]
    #[arg(long)]
    pub integration: Option<String>,
    /// When to correct: final or every-step [default: final]
    #[arg(long)]
    pub cadence: Option<String>,
    /// Divergence tolerance of the global-full mode [default: 5e-6]
    #[arg(long)]
    pub full_tol: Option<f64>,
    /// Seed recorded with the run [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// CSV output file
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print an aligned table instead of CSV on stdout
    #[arg(long)]
    pub pretty: bool,
}

#[derive(Debug, Args)]
pub struct MeshInfoArgs {
    /// Mesh levels, e.g. 1..4
    #[arg(long, default_value = "1..4")]
    pub levels: String,
    /// Degree used for the dof counts
    #[arg(long, default_value_t = 3)]
    pub p: usize,
}

/// Caps rayon's worker count from HDIVCT_THREADS (0 or unset: automatic).
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("HDIVCT_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().map_err(|_| CliError::Usage(format!("HDIVCT_THREADS='{v}' is not a count")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Failure(format!("thread pool: {e}")))?;
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::BasisCheck(a) => commands::basis_check(&a),
        Command::Lemma1(a) => commands::lemma1(&a),
        Command::Run(a) => commands::run(&a),
        Command::MeshInfo(a) => commands::mesh_info(&a),
    }
}
