//! Command-line front end for `sphp-core`.
//!
//! Every subcommand maps a [`config::RunConfig`] onto one table of the physics
//! pipeline and writes it as CSV (bit-reproducible) or as a JSON envelope.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use sphp_core::table::Table;

use crate::commands::CouplingKind;
use crate::config::{Format, Overrides, Resolved, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sphp_core::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 config error, 3 domain error, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        use sphp_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Write { .. } => 2,
            CliError::Core(E::Parse { .. } | E::Validation { .. }) => 2,
            CliError::Core(E::Truncation { .. } | E::Overlap { .. }) => 4,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "sphp",
    version,
    about = "Surface phonon polaritons coupled to NV spin ensembles"
)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Material preset name or path to a material file.
    #[arg(long, global = true, value_name = "PRESET|PATH")]
    pub material: Option<String>,
    /// Output file (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Seed for spin-position sampling.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// μ⊥ and μ∥ over a frequency grid.
    Permeability,
    /// Surface-mode wavenumbers over a frequency grid.
    Dispersion,
    /// Mode length and field ratios across the bound segment.
    Mode,
    /// Single-spin g(ω, z) or collective G(ω, h).
    Coupling {
        #[arg(long, value_enum, default_value_t = CouplingKind::Collective)]
        kind: CouplingKind,
    },
    /// Cooperativity versus superlattice period.
    Cooperativity,
    /// Eigenfrequencies of the coupled system versus detuning.
    Crossing,
    /// Swap trajectory and two-mode storage report.
    Store,
}

impl Cli {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            material: self.material.clone(),
            out: self.out.clone(),
            format: self.format,
            seed: self.seed,
        }
    }

    /// Config file (or defaults) with command-line overrides applied.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        config.apply(&self.overrides());
        config.resolve()
    }
}

pub fn execute(command: Command, resolved: &Resolved) -> Result<Table, CliError> {
    match command {
        Command::Permeability => commands::cmd_permeability(resolved),
        Command::Dispersion => commands::cmd_dispersion(resolved),
        Command::Mode => commands::cmd_mode(resolved),
        Command::Coupling { kind } => commands::cmd_coupling(resolved, kind),
        Command::Cooperativity => commands::cmd_cooperativity(resolved),
        Command::Crossing => commands::cmd_crossing(resolved),
        Command::Store => commands::cmd_store(resolved),
    }
}

/// Resolve the configuration, run the subcommand and write its table.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        // Fails only if a pool already exists, in which case it is reused.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let resolved = cli.resolve()?;
    let table = execute(cli.command, &resolved)?;
    output::emit(&table, &resolved)
}
